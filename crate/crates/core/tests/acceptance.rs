//! Desk-scale acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured numbers before asserting.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hamsplit::diffusion::{experiment_window, run_scaling_study, single_transition, ChainConfig, Scheme, StopReason};
use hamsplit::frequencies::{golden, FrequencyVector, PerturbationSeries, QMode};
use hamsplit::melnikov::{
    action_glued, action_reduced, evaluate_grid, fourier_of_grid, melnikov_coefficient, melnikov_primitive, melnikov_series,
    GridKind, GridSpec, HomoclinicGrid,
};
use hamsplit::pendulum::{separatrix, solve_invariant_torus, SolverOptions, TorusOptions};
use hamsplit::quadrature::{adaptive, QuadOptions};
use hamsplit::splitting::{
    check_3ts_window, check_splitting_condition, three_timescale_analysis, ThreeScaleConstants, ThreeScaleOptions,
    ThreeScaleOutcome, ThreeScaleProfiles, SplittingWindow, WindowSearch,
};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn log_slope(mu: &[f64], v: &[f64]) -> f64 {
    let x: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
    let y: Vec<f64> = v.iter().map(|m| m.ln()).collect();
    slope(&x, &y)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn kernel_direction(w: &[f64]) -> [f64; 2] {
    let n = w[0].hypot(w[1]);
    [-w[1] / n, w[0] / n]
}

fn two_mode() -> PerturbationSeries<f64> {
    PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 1.0)])
}

#[test]
fn criterion_01_separatrix_identities() {
    let mut energy: f64 = 0.0;
    for i in 0..=6000 {
        let t = -30.0 + 0.01 * i as f64;
        let (q, v) = separatrix(t, 0.0);
        energy = energy.max((0.5 * v * v + q.cos() - 1.0).abs());
    }
    let w = golden::<f64>();
    let opts = SolverOptions::default();
    let f = two_mode();
    let oracle_action = simpson(|t: f64| 4.0 / t.cosh().powi(2), -40.0, 40.0, 200_000);
    let glued = action_glued(0.0, &[0.4, 1.3], 0.0, &w, &f, &opts).unwrap();
    let reduced = action_reduced(0.0, &[0.4, 1.3], 0.0, &w, &f, &opts).unwrap();
    let f0 = 0.37;
    let flat = PerturbationSeries::cosines(2, &[(vec![0, 0], f0)]);
    let oracle_gamma = simpson(|t: f64| (1.0 - (4.0 * t.exp().atan()).cos()) * f0, -40.0, 40.0, 200_000);
    let closed = melnikov_coefficient(&[0, 0], &w, Complex::new(f0, 0.0)).re;
    let quad = melnikov_primitive(&[0.2, 0.9], &w, &flat).unwrap();
    let errs = [
        (glued - oracle_action).abs(),
        (reduced - oracle_action).abs(),
        (oracle_action - 8.0).abs(),
        (closed - 4.0 * f0).abs(),
        (closed - oracle_gamma).abs(),
        (quad - oracle_gamma).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let pass = energy < 1e-12 && worst < 1e-8;
    verdict(1, "separatrix identities", pass, &format!("energy defect {energy:.2e}, worst action/normalization error {worst:.2e}"));
    assert!(pass, "{errs:?}");
}

#[test]
fn criterion_02_melnikov_coefficient_law() {
    let w = golden::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let opts = QuadOptions::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 10 {
        let k = vec![rng.gen_range(-8i64..=8), rng.gen_range(-8i64..=8)];
        let x = k[0] as f64 * w[0] + k[1] as f64 * w[1];
        if !(0.1..=10.0).contains(&x.abs()) {
            continue;
        }
        let fk = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let closed = melnikov_coefficient(&k, &w, fk);
        let weight = |t: f64| 1.0 - separatrix(t, 0.0).0.cos();
        let re = adaptive(|t: f64| weight(t) * (x * t).cos(), -40.0, 40.0, 64, &opts).unwrap().value;
        let im = adaptive(|t: f64| weight(t) * (x * t).sin(), -40.0, 40.0, 64, &opts).unwrap().value;
        let direct = fk * Complex::new(re, im);
        let rel = (closed - direct).norm() / direct.norm();
        println!("  k={k:?} |k.w|={:.4} closed={closed:.6e} direct={direct:.6e} rel={rel:.2e}", x.abs());
        worst = worst.max(rel);
        count += 1;
    }
    let pass = worst < 1e-6;
    verdict(2, "melnikov coefficient law", pass, &format!("10 modes, worst relative error {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_03_translation_identity() {
    let w = golden::<f64>();
    let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 1.0), (vec![0, 1], 0.5)]);
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mu = 1e-3;
    let (mut glued, mut reduced): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let a = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
        let theta = rng.gen_range(-3.0..3.0);
        let s: Vec<f64> = a.iter().zip(&w).map(|(x, y)| x + y * theta).collect();
        glued = glued.max(
            (action_glued(mu, &a, theta, &w, &f, &opts).unwrap() - action_glued(mu, &s, 0.0, &w, &f, &opts).unwrap()).abs(),
        );
        reduced = reduced.max(
            (action_reduced(mu, &a, theta, &w, &f, &opts).unwrap() - action_reduced(mu, &s, 0.0, &w, &f, &opts).unwrap())
                .abs(),
        );
    }
    let pass = glued < 1e-7 && reduced < 1e-7;
    verdict(3, "translation identity", pass, &format!("100 samples, worst glued {glued:.2e}, reduced {reduced:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_04_first_order_dominance() {
    let w = golden::<f64>();
    let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![1, 1], 1.0), (vec![0, 1], 0.5)]);
    let opts = SolverOptions::default();
    let mus = [1e-2, 3e-3, 1e-3, 3e-4];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g0 = melnikov_series(&[0.0, 0.0], &w, &f).0;
    let mut slopes = Vec::new();
    for _ in 0..5 {
        let a = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
        let ga = melnikov_series(&a, &w, &f).0;
        for solve in [action_glued::<f64>, action_reduced::<f64>] {
            let rem: Vec<f64> = mus
                .iter()
                .map(|&mu| {
                    let d = solve(mu, &a, 0.0, &w, &f, &opts).unwrap() - solve(mu, &[0.0, 0.0], 0.0, &w, &f, &opts).unwrap();
                    (d + mu * (ga - g0)).abs()
                })
                .collect();
            slopes.push(log_slope(&mus, &rem));
        }
    }
    let pass = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    verdict(4, "first-order dominance", pass, &format!("slopes at 5 phases (glued, reduced) {slopes:.3?}"));
    assert!(pass);
}

#[test]
fn criterion_05_coefficient_bound_shape() {
    let w = golden::<f64>();
    let support: Vec<Vec<i64>> = vec![
        vec![1, 0],
        vec![0, 1],
        vec![1, 1],
        vec![1, -1],
        vec![2, 1],
        vec![1, 2],
        vec![2, -1],
        vec![-1, 2],
    ];
    let terms: Vec<(Vec<i64>, f64)> = support.iter().map(|k| (k.clone(), 1.0)).collect();
    let f = PerturbationSeries::cosines(2, &terms);
    let opts = SolverOptions::default();
    let mus = [1e-2, 5e-3, 2.5e-3];
    let floor = 1e-10;
    let mut sup = Vec::new();
    let mut envelope = None;
    for &mu in &mus {
        let grid = evaluate_grid(GridKind::Reduced, mu, GridSpec::full_torus(&[16, 16]), &w, &f, None, &opts).unwrap();
        let table = fourier_of_grid(&grid).unwrap();
        let mut rem: Vec<(f64, f64)> = Vec::new();
        for (k, c) in table.modes() {
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let x = (k[0] as f64 * w[0] + k[1] as f64 * w[1]).abs();
            let r = (c + melnikov_coefficient(&k, &w, f.coefficient(&k, 0)) * mu).norm();
            rem.push((x, r));
        }
        sup.push(rem.iter().fold(0.0f64, |m, r| m.max(r.1)));
        if envelope.is_none() {
            let bins: BTreeSet<i64> = rem.iter().filter(|r| r.0 >= 2.0 && r.1 > floor).map(|r| r.0.floor() as i64).collect();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for b in bins {
                let top = rem
                    .iter()
                    .filter(|r| r.0.floor() as i64 == b && r.1 > floor)
                    .fold((0.0, 0.0), |m: (f64, f64), r| if r.1 > m.1 { *r } else { m });
                xs.push(top.0);
                ys.push(top.1.ln());
            }
            println!("  envelope points (|k.w|, remainder): {:?}", xs.iter().zip(&ys).map(|(x, y)| (*x, y.exp())).collect::<Vec<_>>());
            envelope = Some(slope(&xs, &ys));
        }
    }
    let mu_slope = log_slope(&mus, &sup);
    let env = envelope.unwrap();
    let target = -(FRAC_PI_2 - 0.3);
    let pass = (mu_slope - 2.0).abs() <= 0.2 && ((env - target) / target).abs() <= 0.15;
    verdict(
        5,
        "coefficient bound shape",
        pass,
        &format!("mu slope {mu_slope:.3}, envelope slope {env:.3} vs {target:.4}, sup remainders {}", sci(&sup)),
    );
    assert!(pass);
}

#[test]
fn criterion_06_three_time_scales() {
    let f = PerturbationSeries::cosines(2, &[(vec![1, 0], 1.0), (vec![0, 1], 1.0)]);
    let opts = ThreeScaleOptions::default();
    let report = three_timescale_analysis(&[0.05, 0.04, 0.03, 0.02], &f, &opts).unwrap();
    let eps: f64 = 0.05;
    let mu = opts.mu(eps);
    let omega = opts.omega(eps);
    let grid = evaluate_grid(GridKind::Reduced, mu, GridSpec::full_torus(&opts.shape), &omega, &f, None, &opts.solver).unwrap();
    let table = fourier_of_grid(&grid).unwrap();
    let profiles = ThreeScaleProfiles::melnikov(&omega, &f).unwrap().scaled(-1.0);
    let consts = ThreeScaleConstants { c: 1.0, d: 1.0, c_bar: 1.0, rho: 0.4 };
    let outcome = check_3ts_window(eps, mu, &profiles, &consts, &table).unwrap();
    let expected_delta = consts.c * mu / (2.0 * eps.sqrt()) * (-FRAC_PI_2 / eps.sqrt()).exp();
    let window_ok = match &outcome {
        ThreeScaleOutcome::Validated { window, .. } => ((window.delta - expected_delta) / expected_delta).abs() < 1e-12,
        _ => false,
    };
    let target = -FRAC_PI_2;
    let slope_ok = ((report.slope_normalized - target) / target).abs() <= 0.1;
    let pass = slope_ok && window_ok;
    verdict(
        6,
        "three time scales",
        pass,
        &format!(
            "normalized slope {:.4} (raw {:.4}), window at eps={eps}: {}",
            report.slope_normalized,
            report.slope_raw,
            outcome.to_text().lines().next().unwrap_or("")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_splitting_checker() {
    let h: f64 = 0.002;
    let center = [0.4, -0.3];
    let m = (2.4 / h).round() as usize + 1;
    let spec = GridSpec::centered_patch(&center, h, &[m, m]);
    let radial = HomoclinicGrid::from_fn(GridKind::Sampled, 0.0, spec, |a: &[f64]| {
        let r = (a[0] - center[0]).abs().max((a[1] - center[1]).abs());
        r * r
    })
    .unwrap();
    let window = SplittingWindow::new(center.to_vec(), 1.0, 0.07, 0.5).unwrap();
    let r = check_splitting_condition(&radial, &window).unwrap();
    let sub = (window.delta / 2.0).sqrt();
    let sup = (0.75 * window.delta).sqrt();
    let radii_ok = (r.sublevel_radius - sub).abs() <= h && (r.superlevel_radius - sup).abs() <= h;
    let flat = HomoclinicGrid::from_fn(GridKind::Sampled, 0.0, GridSpec::full_torus(&[128, 128]), |_| 3.0f64).unwrap();
    let fr = check_splitting_condition(&flat, &SplittingWindow::new(vec![1.0, 1.0], 1.0, 0.2, 0.5).unwrap()).unwrap();
    let constant_ok = !fr.cond_i && (fr.margin_i + 0.5).abs() < 1e-12;
    let pass = r.holds() && radii_ok && constant_ok;
    verdict(
        7,
        "splitting checker",
        pass,
        &format!(
            "radial model (1, 0.07, 0.5): cond (i, ii, iii) = ({}, {}, {}), radii {:.4}/{:.4} vs closed form {sub:.4}/{sup:.4}, gap {:.4} vs 2 alpha = 0.14; constant grid fails (i): {constant_ok}",
            r.cond_i, r.cond_ii, r.cond_iii, r.sublevel_radius, r.superlevel_radius, r.sublevel_gap
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_torus_persistence() {
    let w = golden::<f64>();
    let fv = FrequencyVector::new(w.clone(), 0.05, 1.0).unwrap();
    let topts = TorusOptions { k_modes: 6, ..Default::default() };

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut flat = PerturbationSeries::new(2, QMode::GeneralInQ);
    for k in [[1i64, 0], [0, 1], [1, -1], [2, 1], [1, 2], [3, -2]] {
        let c = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        flat.insert(k.to_vec(), 0, c);
        flat.insert(vec![-k[0], -k[1]], 0, c.conj());
    }
    let mu = 1e-2;
    let t = solve_invariant_torus(mu, &fv, &flat, &topts).unwrap();
    let mut closed_err: f64 = 0.0;
    for (key, fk) in flat.coefficients() {
        let wk = fv.dot(&key.k);
        for d in 0..2 {
            let expect = *fk * (-mu * key.k[d] as f64 / wk);
            let got = t.a_hat[d].get(&key.k).copied().unwrap_or_default();
            closed_err = closed_err.max((got - expect).norm());
        }
    }

    let mut sq = PerturbationSeries::new(2, QMode::GeneralInQ);
    sq.add_sine(&[1, 0], 1, 0.5);
    sq.add_sine(&[-1, 0], 1, 0.5);
    assert!((sq.evaluate(&[0.3, 1.0], 0.7) - 0.7f64.sin() * 0.3f64.cos()).abs() < 1e-14);
    let mus = [1e-3, 2e-3, 4e-3, 8e-3];
    let mut norms = Vec::new();
    let mut response: f64 = 0.0;
    for &mu in &mus {
        let t = solve_invariant_torus(mu, &fv, &sq, &topts).unwrap();
        let amp = mu / (1.0 + w[0] * w[0]);
        let mut err: f64 = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                let psi = [TAU * i as f64 / 16.0, TAU * j as f64 / 16.0];
                err = err.max((t.q_at(&psi) - amp * psi[0].cos()).abs());
                err = err.max((t.p_at(&psi) + amp * w[0] * psi[0].sin()).abs());
                for a in t.a_at(&psi) {
                    err = err.max(a.abs());
                }
            }
        }
        response = response.max(err / (mu * mu));
        norms.push(t.coefficient_norms().0);
    }
    let lin = log_slope(&mus, &norms);
    let pass = closed_err < 1e-10 && response <= 1.0 && (lin - 1.0).abs() <= 0.1;
    verdict(
        8,
        "torus persistence",
        pass,
        &format!("closed-form a_k error {closed_err:.2e}, max linear-response error / mu^2 {response:.3e}, norm slope {lin:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_diffusion_scaling() {
    let w = golden::<f64>();
    let f = two_mode();
    let mus = [2e-2, 1e-2, 5e-3, 2.5e-3];

    let mut phases = Vec::new();
    for i in 0..8 {
        for j in 0..8 {
            phases.push([TAU * (i as f64 + 0.5) / 8.0, TAU * (j as f64 + 0.5) / 8.0]);
        }
    }
    let mut rms = Vec::new();
    for &mu in &mus {
        let mut acc = 0.0;
        for a in &phases {
            let ev = single_transition(mu, &w, &f, a, &[0.0, 0.0], 1e-3, 1e-3, Scheme::Yoshida4).unwrap();
            acc += ev.delta_i.iter().zip(&ev.predicted).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
        rms.push((acc / phases.len() as f64).sqrt());
    }
    let jump_slope = log_slope(&mus, &rms);

    let dir = kernel_direction(&w);
    let target = vec![0.5 * dir[0], 0.5 * dir[1]];
    let (runs, report) = run_scaling_study(&mus, 1.0, |mu| {
        let (window, _, _) = experiment_window(mu, &w, &f, &[24, 24], &[1024, 1024], &SolverOptions::default(), &WindowSearch::default())?;
        let mut c = ChainConfig::new(w.clone(), mu, f.clone(), vec![0.0, 0.0], target.clone(), window, 0.02);
        c.seed = 1;
        c.budget.max_time = 1e6;
        Ok(c)
    })
    .unwrap();
    for (run, row) in runs.iter().zip(&report.rows) {
        println!(
            "  mu={:.1e} transitions={} T_d={:.1} ratio={:.3} bound={:.1}",
            run.mu,
            run.events.len(),
            row.t_d,
            row.ratio,
            row.bound.unwrap_or(f64::NAN)
        );
    }
    let reached = runs.iter().all(|r| r.stop == StopReason::Reached);
    let bounded = report.bound_c.is_some() && report.rows.iter().all(|r| r.bound.is_some_and(|b| r.t_d <= b * (1.0 + 1e-12)));
    let pass = reached && bounded && report.spread <= 2.0 && (jump_slope - 2.0).abs() <= 0.3;
    verdict(
        9,
        "diffusion scaling",
        pass,
        &format!(
            "T_d mu/ln(1/mu) spread {:.3}, fitted C {:.3}, jump error slope {jump_slope:.3} (rms {})",
            report.spread,
            report.bound_c.unwrap_or(f64::NAN),
            sci(&rms)
        ),
    );
    assert!(pass);
}

fn run_cli(command: &str, config: &Path, out: &Path, workers: usize) -> i32 {
    hamsplit::cli::run([
        "hamsplit".to_string(),
        command.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
        "--workers".into(),
        workers.to_string(),
        "--seed".into(),
        "7".into(),
    ])
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("experiment.ini");
    let dir = kernel_direction(&golden::<f64>());
    std::fs::write(
        &cfg,
        format!(
            "[system]\nomega = golden\n\n[perturbation]\nmodes = 1 0 0.5 0.0; -1 0 0.5 0.0; 1 1 0.5 0.0; -1 -1 0.5 0.0\n\n[solver]\ngrid = 16 16\nfine_grid = 512 512\n\n\
             [experiment]\nmu = 2e-2 1e-2\nkinds = glued reduced\nsource = 0 0\ntarget = {} {}\neta = 0.05\nseeds = 1 2\nmax_time = 1e6\n",
            0.25 * dir[0],
            0.25 * dir[1]
        ),
    )
    .unwrap();
    let mut identical = true;
    let mut files = 0;
    for command in ["melnikov", "homoclinic", "diffuse"] {
        let a = tmp.path().join(format!("{command}_w1"));
        let b = tmp.path().join(format!("{command}_w8"));
        assert_eq!(run_cli(command, &cfg, &a, 1), 0, "{command}");
        assert_eq!(run_cli(command, &cfg, &b, 8), 0, "{command}");
        let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
        files += fa.len();
        identical &= !fa.is_empty() && fa == fb;
    }
    verdict(10, "determinism", identical, &format!("{files} files compared byte for byte across 1 and 8 workers"));
    assert!(identical);
}
