use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::diffusion::Scheme;
use crate::error::{Error, Result};
use crate::frequencies::{golden, FrequencyVector, PerturbationSeries, QMode};
use crate::melnikov::GridKind;
use crate::pendulum::{SolverOptions, TorusOptions};
use crate::splitting::SplittingWindow;

/// Rotator frequencies: explicit or on the three-time-scale family.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySource {
    Explicit(Vec<f64>),
    ThreeScale { eps: f64, a: f64, slow: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SystemBlock {
    pub frequencies: FrequencySource,
    pub gamma: f64,
    pub tau: f64,
    /// Order up to which the Diophantine inequality is certified; 0 skips it.
    pub certify_order: i64,
}

#[derive(Debug, Clone)]
pub struct SolverBlock {
    pub solver: SolverOptions<f64>,
    pub torus: TorusOptions<f64>,
    pub grid: Vec<usize>,
    pub fine_grid: Vec<usize>,
    pub dt: f64,
    pub scheme: Scheme,
}

/// Subcommand-specific parameters; unused keys are ignored.
#[derive(Debug, Clone)]
pub struct ExperimentBlock {
    pub mu: Vec<f64>,
    pub kinds: Vec<GridKind>,
    /// Explicit splitting window; searched around the minimum when absent.
    pub window: Option<(Vec<f64>, f64, f64, f64)>,
    pub grid_file: Option<PathBuf>,
    pub eps: Vec<f64>,
    pub eps_check: Option<f64>,
    pub threescale_shape: [usize; 2],
    pub three_c: f64,
    pub three_d: f64,
    pub three_c_bar: f64,
    pub three_rho: f64,
    pub source: Option<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub eta: f64,
    pub launch_radius: Option<f64>,
    pub seeds: Vec<u64>,
    pub max_time: f64,
    pub max_transitions: usize,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

/// Parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: SystemBlock,
    pub perturbation: PerturbationSeries<f64>,
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
    pub output: OutputBlock,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct Section<'a> {
    name: &'a str,
    props: Option<&'a ini::Properties>,
}

impl<'a> Section<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim).filter(|s| !s.is_empty())
    }

    fn parse<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<V>()
                .map(Some)
                .map_err(|_| cfg_err(format!("[{}] {key}: cannot parse '{v}'", self.name))),
        }
    }

    fn or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<V>().map_err(|_| cfg_err(format!("[{}] {key}: cannot parse '{s}'", self.name))))
                .collect::<Result<Vec<V>>>()
                .map(Some),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(format!("{name} must be positive, got {v}")))
    }
}

fn shape(name: &str, v: Vec<usize>, n: usize) -> Result<Vec<usize>> {
    if v.len() != n {
        return Err(cfg_err(format!("{name} needs {n} sizes, got {}", v.len())));
    }
    if v.iter().any(|&s| s < 2) {
        return Err(cfg_err(format!("{name} sizes must be at least 2")));
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text, &base)?, text))
    }

    /// Parses the INI text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| cfg_err(format!("malformed config: {e}")))?;
        let sec = |name: &'static str| Section {
            name,
            props: ini.section(Some(name)),
        };
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let sys = sec("system");
        let frequencies = match (sys.raw("omega"), sys.parse::<f64>("eps")?) {
            (Some("golden"), None) => FrequencySource::Explicit(golden()),
            (Some(_), None) => FrequencySource::Explicit(sys.list("omega")?.unwrap_or_default()),
            (None, Some(eps)) => FrequencySource::ThreeScale {
                eps: positive("eps", eps)?,
                a: sys.or("a", 1.0)?,
                slow: sys.list("slow")?.unwrap_or_else(|| vec![1.0]),
            },
            (Some(_), Some(_)) => return Err(cfg_err("[system] give either omega or eps, not both")),
            (None, None) => return Err(cfg_err("[system] omega or eps is required")),
        };
        let system = SystemBlock {
            frequencies,
            gamma: positive("gamma", sys.or("gamma", 1e-3)?)?,
            tau: sys.or("tau", 1.0)?,
            certify_order: sys.or("certify_order", 0)?,
        };

        let pert = sec("perturbation");
        let q_mode = match pert.raw("q_mode").unwrap_or("factor") {
            "factor" => QMode::FactorOneMinusCosQ,
            "general" => QMode::GeneralInQ,
            other => return Err(cfg_err(format!("[perturbation] unknown q_mode '{other}'"))),
        };
        let table = match (pert.raw("table"), pert.raw("modes")) {
            (Some(path), None) => {
                let p = resolve(path);
                std::fs::read_to_string(&p).map_err(|e| cfg_err(format!("cannot read mode table {}: {e}", p.display())))?
            }
            (None, Some(inline)) => inline.split(';').map(str::trim).collect::<Vec<_>>().join("\n"),
            (Some(_), Some(_)) => return Err(cfg_err("[perturbation] give either table or modes, not both")),
            (None, None) => return Err(cfg_err("[perturbation] table or modes is required")),
        };
        let header = match q_mode {
            QMode::FactorOneMinusCosQ => "# mode factor\n",
            QMode::GeneralInQ => "# mode general\n",
        };
        let perturbation = PerturbationSeries::from_table(&format!("{header}{table}")).map_err(|e| cfg_err(format!("mode table: {e}")))?;
        perturbation.validate(1e-12).map_err(|e| cfg_err(format!("mode table: {e}")))?;
        let n = perturbation.dim();
        let dim = match &system.frequencies {
            FrequencySource::Explicit(w) => w.len(),
            FrequencySource::ThreeScale { slow, .. } => 1 + slow.len(),
        };
        if dim != n {
            return Err(cfg_err(format!("frequency vector has {dim} components but the perturbation has {n} angles")));
        }

        let sol = sec("solver");
        let mut solver = SolverOptions::<f64>::default();
        solver.tol = positive("tol", sol.or("tol", solver.tol)?)?;
        solver.t_cut = sol.parse("t_cut")?;
        solver.step = sol.parse("step")?;
        solver.max_iter = sol.or("max_iter", solver.max_iter)?;
        solver.mu_max = positive("mu_max", sol.or("mu_max", solver.mu_max)?)?;
        let mut torus = TorusOptions::<f64>::default();
        torus.k_modes = sol.or("k_modes", torus.k_modes)?;
        torus.mu_max = solver.mu_max;
        let solver_block = SolverBlock {
            solver,
            torus,
            grid: shape("grid", sol.list("grid")?.unwrap_or_else(|| vec![32; n]), n)?,
            fine_grid: shape("fine_grid", sol.list("fine_grid")?.unwrap_or_else(|| vec![1024; n]), n)?,
            dt: positive("dt", sol.or("dt", 1e-3)?)?,
            scheme: match sol.raw("scheme").unwrap_or("yoshida4") {
                "yoshida4" => Scheme::Yoshida4,
                "leapfrog" => Scheme::Leapfrog,
                other => return Err(cfg_err(format!("[solver] unknown scheme '{other}'"))),
            },
        };

        let ex = sec("experiment");
        let mu = ex.list::<f64>("mu")?.unwrap_or_default();
        if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(cfg_err("[experiment] mu values must be non-negative"));
        }
        let kinds = ex
            .raw("kinds")
            .unwrap_or("glued")
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(GridKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        let window = match (ex.list::<f64>("center")?, ex.parse::<f64>("rho")?, ex.parse::<f64>("alpha")?, ex.parse::<f64>("delta")?) {
            (Some(c), Some(r), Some(a), Some(d)) => {
                SplittingWindow::new(c.clone(), r, a, d).map_err(|e| cfg_err(format!("window: {e}")))?;
                if c.len() != n {
                    return Err(cfg_err("window center has the wrong dimension"));
                }
                Some((c, r, a, d))
            }
            (None, None, None, None) => None,
            _ => return Err(cfg_err("[experiment] a window needs center, rho, alpha and delta")),
        };
        let grid_file = ex.raw("grid_file").map(resolve);
        if let Some(p) = &grid_file {
            if !p.exists() {
                return Err(cfg_err(format!("grid file {} does not exist", p.display())));
            }
        }
        let vector = |key: &str| -> Result<Option<Vec<f64>>> {
            let v = ex.list::<f64>(key)?;
            if let Some(v) = &v {
                if v.len() != n {
                    return Err(cfg_err(format!("[experiment] {key} needs {n} components")));
                }
            }
            Ok(v)
        };
        let ts = ex.list::<usize>("threescale_grid")?.unwrap_or_else(|| vec![8, 8]);
        let ts = shape("threescale_grid", ts, 2)?;
        let experiment = ExperimentBlock {
            mu,
            kinds,
            window,
            grid_file,
            eps: ex.list("eps")?.unwrap_or_default(),
            eps_check: ex.parse("eps_check")?,
            threescale_shape: [ts[0], ts[1]],
            three_c: ex.or("c", 1.0)?,
            three_d: ex.or("d", 1.0)?,
            three_c_bar: ex.or("c_bar", 1.0)?,
            three_rho: ex.or("window_rho", 0.4)?,
            source: vector("source")?,
            target: vector("target")?,
            eta: positive("eta", ex.or("eta", 0.02)?)?,
            launch_radius: ex.parse("launch_radius")?,
            seeds: ex.list("seeds")?.unwrap_or_else(|| vec![0]),
            max_time: positive("max_time", ex.or("max_time", 1e7)?)?,
            max_transitions: ex.or("max_transitions", 100_000)?,
        };

        let out = sec("output");
        let output = OutputBlock {
            dir: resolve(out.raw("dir").unwrap_or("out")),
        };
        Ok(Self {
            system,
            perturbation,
            solver: solver_block,
            experiment,
            output,
        })
    }

    pub fn omega(&self) -> Vec<f64> {
        match &self.system.frequencies {
            FrequencySource::Explicit(w) => w.clone(),
            FrequencySource::ThreeScale { eps, a, slow } => {
                let mut w = vec![1.0 / eps.sqrt()];
                w.extend(slow.iter().map(|b| b * eps.powf(*a)));
                w
            }
        }
    }

    pub fn frequency_vector(&self) -> Result<FrequencyVector<f64>> {
        let v = FrequencyVector::new(self.omega(), self.system.gamma, self.system.tau)?;
        if self.system.certify_order > 0 {
            v.certify(self.system.certify_order)
        } else {
            Ok(v)
        }
    }
}
