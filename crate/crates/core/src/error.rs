use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The objective blew past the divergence guard. Carries the objective
    /// trace up to and including the offending iteration.
    #[error("solver diverged at iteration {iteration}: objective {objective:.6e} exceeds 10x the initial value")]
    Divergence {
        iteration: usize,
        objective: f64,
        trace: Vec<f64>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
