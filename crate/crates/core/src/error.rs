//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (bad magic, version, truncation).
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid input carrying unusable values.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid distribution or model parameters.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Numerical failure (singular matrix, non-finite accumulation).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Caller misuse: mismatched shapes, empty inputs, bad configuration.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
