use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the hyperboloid: {0}")]
    OffManifold(String),

    #[error("point is outside the open unit ball (norm {0})")]
    OutsideBall(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid distance matrix: {0}")]
    InvalidHdm(String),

    #[error("Lorentz eigenstructure violated: {0}")]
    Eigenstructure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("solver did not converge after {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, HdmError>;
