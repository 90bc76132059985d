use std::path::{Path, PathBuf};

use hamsplit::melnikov::{melnikov_kernel, GridKind, GridSpec, HomoclinicGrid};

const TWO_MODE: &str = "1 0 0.5 0.0; -1 0 0.5 0.0; 1 1 0.5 0.0; -1 -1 0.5 0.0";

struct Case {
    dir: tempfile::TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.ini"), config).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, command: &str, extra: &[&str]) -> i32 {
        let mut args = vec![
            "hamsplit".to_string(),
            command.to_string(),
            "--config".into(),
            self.path("run.ini").display().to_string(),
            "--out".into(),
            self.path("out").display().to_string(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        hamsplit::cli::run(args)
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path("out").join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

fn config(modes: &str, solver: &str, experiment: &str) -> String {
    format!("[system]\nomega = golden\n\n[perturbation]\nmodes = {modes}\n\n[solver]\n{solver}\n\n[experiment]\n{experiment}\n")
}

fn key_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .to_string()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn assert_headers(dir: &Path) {
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# hamsplit {}", hamsplit::cli::VERSION));
        let hash = lines.next().unwrap().strip_prefix("# config_sha256 ").unwrap();
        assert_eq!(hash.len(), 64);
        assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn single_mode_gamma_table() {
    let c = Case::new(&config("1 0 0.5 0.0; -1 0 0.5 0.0", "grid = 16 16", ""));
    assert_eq!(c.run("melnikov", &[]), 0);
    let table = c.read("gamma_k.txt");
    let row: Vec<f64> = table
        .lines()
        .find(|l| l.starts_with("1 0 "))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    let expect = 0.5 * 2.0 * std::f64::consts::PI / std::f64::consts::FRAC_PI_2.sinh();
    assert!((row[5] - expect).abs() < 1e-14, "{}", row[5]);
    assert!((row[5] - 0.5 * melnikov_kernel(1.0)).abs() < 1e-15);
    assert_headers(&c.path("out"));
}

#[test]
fn constant_coupling_grid_is_four_f0() {
    let c = Case::new(&config("0 0 0.3 0.0", "grid = 8 8", ""));
    assert_eq!(c.run("melnikov", &[]), 0);
    let g = HomoclinicGrid::<f64>::from_text(&c.read("melnikov_grid.txt")).unwrap();
    assert!(g.values.iter().all(|v| (v - 1.2).abs() < 1e-10));
}

#[test]
fn missing_mode_table_is_a_config_error() {
    let c = Case::new("[system]\nomega = golden\n\n[perturbation]\ntable = nowhere.table\n");
    assert_eq!(c.run("melnikov", &[]), 2);
    assert!(!c.path("out").exists());
}

#[test]
fn non_real_mode_table_is_rejected() {
    let c = Case::new(&config("1 0 1.0 0.0", "", ""));
    assert_eq!(c.run("melnikov", &[]), 2);
}

#[test]
fn argument_errors() {
    let c = Case::new(&config(TWO_MODE, "", ""));
    assert_eq!(hamsplit::cli::run(["hamsplit", "melnikov"]), 2);
    assert_eq!(hamsplit::cli::run(["hamsplit", "bogus"]), 2);
    assert_eq!(hamsplit::cli::run(["hamsplit", "--help"]), 0);
    assert_eq!(c.run("melnikov", &["--workers", "0"]), 2);
    assert_eq!(c.run("melnikov", &["--budget=-1"]), 2);
    assert_eq!(c.run("homoclinic", &[]), 2);
}

#[test]
fn homoclinic_unperturbed_is_eight_and_kinds_agree() {
    let c = Case::new(&config(TWO_MODE, "grid = 6 6", "mu = 0 1e-2\nkinds = glued reduced"));
    assert_eq!(c.run("homoclinic", &[]), 0);
    let rows = csv_rows(&c.read("homoclinic_summary.csv"));
    assert_eq!(rows.len(), 4);
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for r in rows.iter().filter(|r| num(r, 1) == 0.0) {
        assert!((num(r, 2) - 8.0).abs() < 1e-9 && (num(r, 4) - 8.0).abs() < 1e-9, "{r:?}");
    }
    let min = |kind: &str| rows.iter().find(|r| r[0] == kind && num(r, 1) > 0.0).map(|r| num(r, 2)).unwrap();
    assert!((min("glued") - min("reduced")).abs() < 1e-6);
    let fourier = c.read("fourier_glued_1.txt");
    let diff: f64 = fourier
        .lines()
        .filter(|l| l.starts_with("# cmp 1 0 "))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .next()
        .unwrap();
    assert!(diff < 1e-3 * 1e-2, "{diff}");
    assert_headers(&c.path("out"));
}

fn bowl_file(case: &Case) -> PathBuf {
    let h: f64 = 0.004;
    let m = (2.4 / h).round() as usize + 1;
    let spec = GridSpec::centered_patch(&[0.0, 0.0], h, &[m, m]);
    let g = HomoclinicGrid::from_fn(GridKind::Sampled, 0.0, spec, |a: &[f64]| {
        let r = a[0].abs().max(a[1].abs());
        8.0 + r * r
    })
    .unwrap();
    let p = case.path("bowl.grid");
    std::fs::write(&p, g.to_text()).unwrap();
    p
}

#[test]
fn bowl_grid_passes_the_splitting_check() {
    let c = Case::new(&config(
        TWO_MODE,
        "",
        "grid_file = bowl.grid\ncenter = 0 0\nrho = 1\nalpha = 0.05\ndelta = 0.5",
    ));
    bowl_file(&c);
    assert_eq!(c.run("splitting", &[]), 0);
    let r = c.read("splitting_report.txt");
    for k in ["cond_i", "cond_ii", "cond_iii"] {
        assert_eq!(key_value(&r, k), "true");
    }
    let m1: f64 = key_value(&r, "margin_i").parse().unwrap();
    assert!((m1 - 0.5).abs() < 1e-12);
    let csv = csv_rows(&c.read("splitting.csv"));
    assert_eq!(csv.len(), 1);
    assert_eq!(&csv[0][3..6], &["true", "true", "true"]);
}

#[test]
fn bowl_grid_without_window_finds_the_centre() {
    let c = Case::new(&config(TWO_MODE, "", "grid_file = bowl.grid"));
    bowl_file(&c);
    assert_eq!(c.run("splitting", &[]), 0);
    let r = c.read("splitting_report.txt");
    let m: Vec<f64> = key_value(&r, "minimum").split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert!(m.iter().all(|x| x.abs() <= 0.004));
    assert_eq!(key_value(&r, "cond_iii"), "true");
}

#[test]
fn malformed_grid_file_is_rejected() {
    let c = Case::new(&config(TWO_MODE, "", "grid_file = bad.grid"));
    std::fs::write(c.path("bad.grid"), "# kind sampled\n# shape 2 2\n1 2\n3 x\n").unwrap();
    assert_eq!(c.run("splitting", &[]), 2);
}

#[test]
fn threescales_writes_csv_and_window() {
    let c = Case::new(
        "[system]\neps = 0.05\n\n[perturbation]\nmodes = 1 0 0.5 0.0; -1 0 0.5 0.0; 0 1 0.5 0.0; 0 -1 0.5 0.0\n\n\
         [experiment]\neps = 0.05 0.04\neps_check = 0.05\n",
    );
    assert_eq!(c.run("threescales", &[]), 0);
    let rows = csv_rows(&c.read("threescales.csv"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let ratio: f64 = r[5].parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-3, "{r:?}");
    }
    let report = c.read("threescales_report.txt");
    let s: f64 = key_value(&report, "slope_normalized").parse().unwrap();
    assert!((s + std::f64::consts::FRAC_PI_2).abs() < 0.1 * std::f64::consts::FRAC_PI_2);
    assert_eq!(key_value(&c.read("threescales_window.txt"), "outcome"), "validated");
}

#[test]
fn diffuse_without_coupling_makes_no_transition() {
    let c = Case::new(&config(
        TWO_MODE,
        "",
        "mu = 0\nsource = 0 0\ntarget = -0.42532540417601994 0.2628655560595668\nseeds = 5",
    ));
    assert_eq!(c.run("diffuse", &[]), 0);
    let s = c.read("diffuse_0_seed5_summary.txt");
    assert_eq!(key_value(&s, "transitions"), "0");
    assert_eq!(key_value(&s, "stop"), "no_admissible_transition");
    assert_eq!(key_value(&s, "T_d"), "none");
}

#[test]
fn diffuse_time_budget_exits_with_four() {
    let c = Case::new(&config(
        TWO_MODE,
        "",
        "mu = 1e-2\nsource = 0 0\ntarget = -0.42532540417601994 0.2628655560595668\n\
         center = 0 0\nrho = 2\nalpha = 0.05\ndelta = 0.005\nmax_time = 50",
    ));
    assert_eq!(c.run("diffuse", &[]), 4);
    let s = c.read("diffuse_0_seed0_summary.txt");
    assert_eq!(key_value(&s, "stop"), "time_budget");
    assert_headers(&c.path("out"));
}

#[test]
fn diffuse_rejects_off_resonance_target() {
    let c = Case::new(&config(
        TWO_MODE,
        "",
        "mu = 1e-2\nsource = 0 0\ntarget = 0.1 0.1\ncenter = 0 0\nrho = 2\nalpha = 0.05\ndelta = 0.005",
    ));
    assert_eq!(c.run("diffuse", &[]), 2);
}

#[test]
fn torus_linear_response() {
    let c = Case::new(
        "[system]\nomega = golden\ngamma = 0.1\ntau = 1\n\n[perturbation]\nq_mode = general\n\
         modes = 1 0 1 0.0 -0.25; -1 0 1 0.0 -0.25; 1 0 -1 0.0 0.25; -1 0 -1 0.0 0.25\n\n\
         [solver]\nk_modes = 4\n\n[experiment]\nmu = 1e-3 2e-3\n",
    );
    assert_eq!(c.run("torus", &[]), 0);
    let rows = csv_rows(&c.read("torus_summary.csv"));
    for r in rows {
        let mu: f64 = r[0].parse().unwrap();
        let q: f64 = r[1].parse().unwrap();
        assert!((q - mu / 2.0).abs() < mu * mu, "{q}");
    }
    assert!(c.read("torus_0.txt").lines().count() > 3);
}

#[test]
fn same_seed_same_bytes() {
    let c = Case::new(&config(TWO_MODE, "grid = 6 6", "mu = 1e-2\nkinds = glued reduced"));
    assert_eq!(c.run("homoclinic", &["--workers", "1"]), 0);
    let first = c.read("homoclinic_glued_0.txt");
    assert_eq!(c.run("homoclinic", &["--workers", "3"]), 0);
    assert_eq!(first, c.read("homoclinic_glued_0.txt"));
}
