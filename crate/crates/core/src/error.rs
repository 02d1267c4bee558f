use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid too coarse: {0}")]
    TooCoarse(String),

    #[error("Newton iteration did not converge after {steps} steps (residual {residual:e})")]
    NonConvergence { steps: usize, residual: f64 },

    #[error("linear solve broke down: {0}")]
    LinearSolve(String),

    #[error("divergence detected: {0}")]
    Divergent(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("point {0} lies outside the sampled annulus")]
    OutOfDomain(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
