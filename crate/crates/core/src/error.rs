use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum PprError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two inputs that must describe the same visit schedule disagree on length.
    #[error("dimension mismatch: expected {expected} visits, got {got}")]
    GridMismatch { expected: usize, got: usize },

    /// Cholesky factorization failed; `minor` is the 1-based leading minor that broke.
    #[error("matrix is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Malformed tabular input. `row` and `col` are 1-based, row 1 is the header.
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PprError>;
