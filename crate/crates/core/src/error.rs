use thiserror::Error;

/// Errors raised by the estimators and their supporting kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {matrix}: expected {expected}, found {found}")]
    DimensionMismatch {
        matrix: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {matrix} at row {row}, column {col}")]
    NonFinite {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("index {index} out of range 1..={len}")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid break set: {0}")]
    InvalidBreaks(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("regime {regime} has {len} observations, at least {required} required")]
    RegimeTooShort {
        regime: usize,
        len: usize,
        required: usize,
    },

    #[error("singular Gram matrix in regime {regime}")]
    SingularRegime { regime: usize },

    #[error("active Gram matrix is rank deficient (minimum break distance too small for {dim} coefficients)")]
    RankDeficient { dim: usize },

    #[error("too many candidates for exhaustive search: {count} > {threshold}")]
    TooManyCandidates { count: usize, threshold: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
