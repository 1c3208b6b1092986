use thiserror::Error;

/// Errors raised by the model, grid and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("(eps={eps}, mu={mu}) is outside the admissible set {{mu in (0, {mu0}), eps <= {big_m}*sqrt(mu)}}: {reason}")]
    Inadmissible {
        eps: f64,
        mu: f64,
        mu0: f64,
        big_m: f64,
        reason: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coefficient set is not of Camassa-Holm or Degasperis-Procesi type ({0})")]
    NotIntegrable(String),

    #[error("operator (1 + c d^2) is singular on the grid for c = {0}")]
    SingularOperator(f64),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("non-finite values at t = {time}")]
    Diverged { time: f64 },

    #[error("fluid depth 1 + eps*zeta is not positive (min {min_depth})")]
    NonPositiveDepth { min_depth: f64 },

    #[error("need ≥ {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("study point mu = {mu} failed: {source}")]
    AtMu { mu: f64, source: Box<Error> },

    #[error("unknown preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
