use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("multiplier is not finite at mode {mode:?}")]
    NonFiniteMultiplier { mode: [i64; 3] },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("field must be real-valued")]
    NotReal,
    #[error("field has zero norm")]
    ZeroField,
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("resolvent solve failed on column {column}: residual {residual:e}, gap estimate {gap:e}")]
    Resolvent {
        column: usize,
        residual: f64,
        gap: f64,
    },
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("outside tubular neighbourhood: distance {dist:e} exceeds threshold {threshold:e}")]
    OutsideTube { dist: f64, threshold: f64 },
    #[error("cutoff {cutoff} exceeds the Nyquist radius {nyquist}")]
    CutoffTooLarge { cutoff: f64, nyquist: f64 },
    #[error("positivity violated at mode {mode:?}: value {value:e}")]
    Positivity { mode: [i64; 3], value: f64 },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
