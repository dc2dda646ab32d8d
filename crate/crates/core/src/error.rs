//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (dimension mismatch,
    /// out-of-range field, non-finite input).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix factorization failed even after jitter escalation.
    #[error("conditioning failure: {0}")]
    Conditioning(String),

    /// A numerical routine produced non-finite values it could not recover from.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A dataset file failed to parse; `row` is 1-based and counts data rows.
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A dataset file has the wrong header or structural layout.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
