use thiserror::Error;

/// Errors produced by the tomography library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("amplitude vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("vector has zero (or non-finite) norm")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("negative probability {value:e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("shot budget {total} is smaller than the number of measurement types {types}")]
    TooFewShots { total: u64, types: usize },

    #[error("matrix is rank deficient (column {0})")]
    RankDeficient(usize),

    #[error("invalid measurement setup: {0}")]
    InvalidSetup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("state norm {norm} deviates from 1 by more than {tol}")]
    NotNormalized { norm: f64, tol: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
