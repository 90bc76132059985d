use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("search budget exceeded: {needed} candidates requested, budget is {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("torus not covered within time {horizon}")]
    NotCovered { horizon: f64 },

    #[error("newton iteration did not converge (last residual {residual:e}): {context}")]
    NonConvergence { residual: f64, context: String },

    #[error("coupling mu = {mu} exceeds the configured smallness threshold {threshold}")]
    MuTooLarge { mu: f64, threshold: f64 },

    #[error("small divisor at mode {k:?}: |omega.k| = {divisor:e} below guard {guard:e}")]
    SmallDivisor { k: Vec<i64>, divisor: f64, guard: f64 },

    #[error("quadrature failed to reach tolerance (estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("grid is not a uniform full-torus grid: {0}")]
    NonUniformGrid(String),

    #[error("wrong perturbation mode: {0}")]
    WrongMode(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
