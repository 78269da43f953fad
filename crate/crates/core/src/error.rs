//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up (vector lengths, matrix dims, layer chaining).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input carried NaN or an infinity where only finite values are allowed.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A configuration value is outside its domain (beta <= 0, lr <= 0, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Integer arithmetic left the u64 range (hyperplane counts grow exponentially).
    #[error("count overflows u64: {0}")]
    Overflow(String),

    /// An operation was asked of a network it does not apply to
    /// (soft-mode collapse, multi-output decomposition, ...).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn nonfinite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
