//! Experiment harness: config ingestion, one subcommand per analysis and
//! plain-text outputs for external plotting.

mod config;

pub use config::{ExperimentBlock, ExperimentConfig, FrequencySource, OutputBlock, SolverBlock, SystemBlock};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::diffusion::{experiment_window, run_transition_chain, scaling_study, ChainConfig, DiffusionRun, ScalingInput};
use crate::error::{Error, Result};
use crate::frequencies::QMode;
use crate::melnikov::{
    evaluate_grid, fourier_of_grid, melnikov_coefficient, synthesize_grid, GridKind, GridSpec, HomoclinicGrid,
};
use crate::pendulum::solve_invariant_torus;
use crate::splitting::{
    check_3ts_window, check_splitting_condition, diffusion_time_bound, find_minimum, suggest_window_from_minimum,
    three_timescale_analysis, SplittingReport, SplittingWindow, ThreeScaleConstants, ThreeScaleOptions,
    ThreeScaleProfiles, WindowSearch,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "hamsplit", version, about = "Separatrix splitting and diffusion-time experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Overrides `[experiment] seeds`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Wall-clock budget in seconds.
    #[arg(long, global = true)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Γ or M grids and the Γ_k table.
    Melnikov,
    /// Homoclinic-function grids and their Fourier comparison with μΓ_k.
    Homoclinic,
    /// Splitting-condition report for a grid.
    Splitting,
    /// Three-time-scale sweep and window check.
    Threescales,
    /// Transition chains and diffusion-time scaling.
    Diffuse,
    /// Invariant-torus solve.
    Torus,
}

/// Process exit status for an error: 2 for configuration and input
/// problems, 3 for solver failures, 4 for exhausted budgets.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } | Error::BudgetExhausted(_) => 4,
        Error::NonConvergence { .. }
        | Error::Quadrature { .. }
        | Error::SmallDivisor { .. }
        | Error::NotCovered { .. }
        | Error::Infeasible(_) => 3,
        _ => 2,
    }
}

/// Writes files into the output directory, each prefixed with the tool
/// version and the config hash.
pub struct Output {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, config_hash: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!("# hamsplit {VERSION}\n# config_sha256 {config_hash}\n"),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, format!("{}{}", self.header, body))?;
        self.written.push(path);
        Ok(())
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Hash of the config text together with the flags that change results.
pub fn config_hash(text: &str, seed: Option<u64>, budget: Option<f64>) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    if let Some(s) = seed {
        h.update(format!("\nseed={s}").as_bytes());
    }
    if let Some(b) = budget {
        h.update(format!("\nbudget={b}").as_bytes());
    }
    hex::encode(h.finalize())
}

/// Parses arguments, runs the subcommand and returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs the subcommand; `Ok` carries 0 or 4 (a run ran out of budget).
pub fn execute(cli: &Cli) -> Result<i32> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let (mut cfg, text) = ExperimentConfig::from_path(path)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.experiment.seeds = vec![seed];
    }
    if cli.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let deadline = match cli.budget {
        Some(b) if b > 0.0 && b.is_finite() => Some(Duration::from_secs_f64(b)),
        Some(b) => return Err(Error::Config(format!("--budget must be positive, got {b}"))),
        None => None,
    };
    let mut out = Output::new(&cfg.output.dir, &config_hash(&text, cli.seed, cli.budget))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Melnikov => cmd_melnikov(&cfg, &mut out).map(|_| 0),
        Command::Homoclinic => cmd_homoclinic(&cfg, &mut out).map(|_| 0),
        Command::Splitting => cmd_splitting(&cfg, &mut out).map(|_| 0),
        Command::Threescales => cmd_threescales(&cfg, &mut out).map(|_| 0),
        Command::Diffuse => cmd_diffuse(&cfg, &mut out, deadline),
        Command::Torus => cmd_torus(&cfg, &mut out).map(|_| 0),
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")
}

fn mu_list(cfg: &ExperimentConfig) -> Result<&[f64]> {
    if cfg.experiment.mu.is_empty() {
        return Err(Error::Config("[experiment] mu is required for this subcommand".into()));
    }
    Ok(&cfg.experiment.mu)
}

pub fn cmd_melnikov(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let omega = cfg.omega();
    let f = &cfg.perturbation;
    let spec = GridSpec::full_torus(&cfg.solver.grid);
    let opts = &cfg.solver.solver;
    match f.mode() {
        QMode::FactorOneMinusCosQ => {
            let g = evaluate_grid(GridKind::Melnikov, 0.0, spec, &omega, f, None, opts)?;
            out.write("melnikov_grid.txt", &g.to_text())?;
            let mut s = String::from("# k re(f_k) im(f_k) |k.omega| re(Gamma_k) im(Gamma_k)\n");
            for (key, fk) in f.coefficients() {
                let x: f64 = key.k.iter().zip(&omega).map(|(&k, w)| k as f64 * w).sum();
                let gk = melnikov_coefficient(&key.k, &omega, *fk);
                let ks: Vec<String> = key.k.iter().map(|k| k.to_string()).collect();
                let _ = writeln!(s, "{} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}", ks.join(" "), fk.re, fk.im, x.abs(), gk.re, gk.im);
            }
            out.write("gamma_k.txt", &s)?;
        }
        QMode::GeneralInQ => {
            let g = evaluate_grid(GridKind::MelnikovGeneral, 0.0, spec, &omega, f, None, opts)?;
            out.write("melnikov_general_grid.txt", &g.to_text())?;
        }
    }
    Ok(())
}

fn homoclinic_grid(cfg: &ExperimentConfig, kind: GridKind, mu: f64, spec: GridSpec<f64>) -> Result<HomoclinicGrid<f64>> {
    let omega = cfg.omega();
    let f = &cfg.perturbation;
    let torus = if kind == GridKind::General {
        Some(solve_invariant_torus(mu, &cfg.frequency_vector()?, f, &cfg.solver.torus)?)
    } else {
        None
    };
    evaluate_grid(kind, mu, spec, &omega, f, torus.as_ref(), &cfg.solver.solver)
}

pub fn cmd_homoclinic(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let omega = cfg.omega();
    let f = &cfg.perturbation;
    let mut summary = String::from("kind,mu,min,argmin,max\n");
    for &kind in &cfg.experiment.kinds {
        if kind == GridKind::Sampled {
            return Err(Error::Config("kind 'sampled' cannot be computed".into()));
        }
        for (i, &mu) in mu_list(cfg)?.iter().enumerate() {
            let spec = GridSpec::full_torus(&cfg.solver.grid);
            let g = homoclinic_grid(cfg, kind, mu, spec)?;
            let name = kind.name();
            out.write(&format!("homoclinic_{name}_{i}.txt"), &g.to_text())?;
            let (lin, min) = g.argmin();
            let (_, max) = g.range();
            let _ = writeln!(summary, "{name},{mu:.17e},{min:.17e},{},{max:.17e}", join(&g.spec.point(lin)));
            let table = fourier_of_grid(&g)?;
            let mut s = table.to_table();
            if f.mode() == QMode::FactorOneMinusCosQ && matches!(kind, GridKind::Glued | GridKind::Reduced | GridKind::General) {
                s.push_str("# comparison: k re(G_k) im(G_k) re(-mu Gamma_k) im(-mu Gamma_k) |difference|\n");
                for (k, c) in table.modes() {
                    let fk = f.coefficient(&k, 0);
                    let mut first = melnikov_coefficient(&k, &omega, fk) * (-mu);
                    if k.iter().all(|&x| x == 0) {
                        first.re += crate::melnikov::UNPERTURBED_ACTION;
                    }
                    let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
                    let _ = writeln!(
                        s,
                        "# cmp {} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                        ks.join(" "),
                        c.re,
                        c.im,
                        first.re,
                        first.im,
                        (c - first).norm()
                    );
                }
            }
            out.write(&format!("fourier_{name}_{i}.txt"), &s)?;
        }
    }
    out.write("homoclinic_summary.csv", &summary)?;
    Ok(())
}

fn window_text(w: &SplittingWindow<f64>) -> String {
    format!(
        "center={}\nrho={:.17e}\nalpha={:.17e}\ndelta={:.17e}\n",
        join(&w.center),
        w.rho,
        w.alpha,
        w.delta
    )
}

pub fn cmd_splitting(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let grid = match &cfg.experiment.grid_file {
        Some(p) => HomoclinicGrid::<f64>::from_text(&std::fs::read_to_string(p)?)?,
        None => {
            let kind = *cfg.experiment.kinds.first().unwrap_or(&GridKind::Glued);
            let mu = mu_list(cfg)?[0];
            let coarse = homoclinic_grid(cfg, kind, mu, GridSpec::full_torus(&cfg.solver.grid))?;
            synthesize_grid(&fourier_of_grid(&coarse)?, GridSpec::full_torus(&cfg.solver.fine_grid))?
        }
    };
    let mut s = String::new();
    let report: SplittingReport<f64> = match &cfg.experiment.window {
        Some((c, r, a, d)) => check_splitting_condition(&grid, &SplittingWindow::new(c.clone(), *r, *a, *d)?)?,
        None => {
            let m = find_minimum(&grid)?;
            let _ = writeln!(s, "minimum={}", join(&m.point));
            let _ = writeln!(s, "minimum_value={:.17e}", m.value);
            let _ = writeln!(s, "hessian_eigenvalues={}", join(&m.eigenvalues));
            let _ = writeln!(s, "nondegenerate={}", m.nondegenerate);
            suggest_window_from_minimum(&grid, &m.point, &WindowSearch::default())?.1
        }
    };
    s.push_str(&report.to_text());
    out.write("splitting_report.txt", &s)?;
    out.write("splitting.csv", &format!("{}\n{}\n", SplittingReport::<f64>::csv_header(), report.csv_row()))?;
    Ok(())
}

pub fn cmd_threescales(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let f = &cfg.perturbation;
    if f.dim() != 2 {
        return Err(Error::Config("the three-time-scale analysis needs two rotators".into()));
    }
    let a = match &cfg.system.frequencies {
        FrequencySource::ThreeScale { a, .. } => *a,
        FrequencySource::Explicit(_) => 1.0,
    };
    let opts = ThreeScaleOptions::<f64> {
        a,
        shape: cfg.experiment.threescale_shape,
        solver: cfg.solver.solver,
        ..Default::default()
    };
    let eps = &cfg.experiment.eps;
    let report = three_timescale_analysis(eps, f, &opts)?;
    out.write("threescales.csv", &report.to_csv())?;
    out.write("threescales_report.txt", &report.to_text())?;
    if let Some(e) = cfg.experiment.eps_check {
        let mu = opts.mu(e);
        let omega = opts.omega(e);
        let g = evaluate_grid(GridKind::Reduced, mu, GridSpec::full_torus(&opts.shape), &omega, f, None, &opts.solver)?;
        let table = fourier_of_grid(&g)?;
        let profiles = ThreeScaleProfiles::melnikov(&omega, f)?.scaled(-1.0);
        let consts = ThreeScaleConstants {
            c: cfg.experiment.three_c,
            d: cfg.experiment.three_d,
            c_bar: cfg.experiment.three_c_bar,
            rho: cfg.experiment.three_rho,
        };
        let outcome = check_3ts_window(e, mu, &profiles, &consts, &table)?;
        out.write("threescales_window.txt", &format!("eps={e:.17e}\nmu={mu:.17e}\n{}", outcome.to_text()))?;
    }
    Ok(())
}

struct DiffuseJob {
    index: usize,
    mu: f64,
    seed: u64,
}

pub fn cmd_diffuse(cfg: &ExperimentConfig, out: &mut Output, wall_clock: Option<Duration>) -> Result<i32> {
    let omega = cfg.omega();
    let f = &cfg.perturbation;
    let ex = &cfg.experiment;
    let n = omega.len();
    let source = ex.source.clone().unwrap_or_else(|| vec![0.0; n]);
    let target = ex.target.clone().ok_or_else(|| Error::Config("[experiment] target is required for diffuse".into()))?;
    let tau = cfg.system.tau;
    let start = Instant::now();
    let jobs: Vec<DiffuseJob> = mu_list(cfg)?
        .iter()
        .enumerate()
        .flat_map(|(index, &mu)| ex.seeds.iter().map(move |&seed| DiffuseJob { index, mu, seed }))
        .collect();
    let results: Vec<Result<(DiffuseJob, SplittingWindow<f64>, DiffusionRun<f64>)>> = jobs
        .into_par_iter()
        .map(|job| {
            let window = match &ex.window {
                Some((c, r, a, d)) => SplittingWindow::new(c.clone(), *r, *a, *d)?,
                None if job.mu == 0.0 => SplittingWindow::new(vec![0.0; n], std::f64::consts::PI, 1.0, f64::MIN_POSITIVE)?,
                None => {
                    experiment_window(job.mu, &omega, f, &cfg.solver.grid, &cfg.solver.fine_grid, &cfg.solver.solver, &WindowSearch::default())?
                        .0
                }
            };
            let mut chain = ChainConfig::new(omega.clone(), job.mu, f.clone(), source.clone(), target.clone(), window.clone(), ex.eta);
            chain.launch_radius = ex.launch_radius;
            chain.dt = cfg.solver.dt;
            chain.scheme = cfg.solver.scheme;
            chain.seed = job.seed;
            chain.budget.max_time = ex.max_time;
            chain.budget.max_transitions = ex.max_transitions;
            chain.budget.wall_clock = wall_clock.map(|w| w.saturating_sub(start.elapsed()));
            let run = run_transition_chain(&chain)?;
            Ok((job, window, run))
        })
        .collect();
    let mut exhausted = false;
    let mut inputs = Vec::new();
    let distance = source.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    for r in results {
        let (job, window, run) = r?;
        let stem = format!("diffuse_{}_seed{}", job.index, job.seed);
        let mut summary = run.to_summary();
        if job.mu > 0.0 || ex.window.is_some() {
            summary.push_str(&window_text(&window));
        } else {
            summary.push_str("window=none\n");
        }
        let bound = (job.mu > 0.0).then(|| diffusion_time_bound(distance, &window, tau, ex.eta, 1.0));
        if let Some(b) = &bound {
            let _ = writeln!(summary, "bound_C1={:.17e}", b.value);
        }
        out.write(&format!("{stem}_summary.txt"), &summary)?;
        out.write(&format!("{stem}_checkpoints.csv"), &run.to_checkpoint_csv())?;
        out.write(&format!("{stem}_events.csv"), &run.to_event_csv())?;
        exhausted |= run.stop.budget_exhausted();
        inputs.push(ScalingInput {
            mu: job.mu,
            t_d: run.t_d,
            bound_unit: bound.map(|b| b.value),
        });
    }
    if inputs.len() > 1 {
        match scaling_study(&inputs) {
            Ok(rep) => {
                out.write("diffuse_scaling.csv", &rep.to_csv())?;
                out.write("diffuse_scaling.txt", &rep.to_text())?;
            }
            Err(Error::Infeasible(msg)) => out.write("diffuse_scaling.txt", &format!("scaling=none\nreason={msg}\n"))?,
            Err(e) => return Err(e),
        }
    }
    Ok(if exhausted { 4 } else { 0 })
}

pub fn cmd_torus(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let freq = cfg.frequency_vector()?;
    let mut s = String::from("mu,norm_Q,norm_P,norm_a,residual,energy,iterations\n");
    for (i, &mu) in mu_list(cfg)?.iter().enumerate() {
        let t = solve_invariant_torus(mu, &freq, &cfg.perturbation, &cfg.solver.torus)?;
        let (q, p, a) = t.coefficient_norms();
        let _ = writeln!(
            s,
            "{mu:.17e},{q:.17e},{p:.17e},{a:.17e},{:.17e},{:.17e},{}",
            t.invariance_residual, t.energy, t.newton_iterations
        );
        out.write(&format!("torus_{i}.txt"), &t.to_table())?;
    }
    out.write("torus_summary.csv", &s)?;
    Ok(())
}
