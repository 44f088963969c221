use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asym:.3e})")]
    NotSymmetric { asym: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("index pair ({i},{j}) out of bounds for dimension {n} (1-based)")]
    PatternOutOfBounds { i: usize, j: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("model generation rejected after {attempts} resamples: density too high for a well-conditioned I - A")]
    GenerationRejected { attempts: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
