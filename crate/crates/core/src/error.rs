use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("truncation leakage {leakage:.3e} exceeds threshold {threshold:.1e}; increase the cutoff")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not orthogonal (deviation {0:.3e})")]
    NotOrthogonal(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("subtraction probability ~ 0 (pre-normalization norm {0:.3e})")]
    VanishingSubtraction(f64),

    #[error("moment order {order} exceeds the configured limit {limit}")]
    MomentOrder { order: usize, limit: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("generator {0} is not local to the partition")]
    NonLocalGenerator(String),

    #[error("grid too small: probability mass outside grid {0:.3e}")]
    GridTooSmall(f64),

    #[error("unsupported generator order {0}")]
    UnsupportedOrder(usize),

    #[error("ill-conditioned Fisher fit (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("state too large for a dense density matrix (dimension {0})")]
    TooLarge(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
