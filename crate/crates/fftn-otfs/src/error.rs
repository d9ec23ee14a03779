//! Error type shared by all simulator modules.

/// Errors produced by configuration validation, domain checks, and numerics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration struct or file failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An argument was outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed (e.g. a Cholesky factorization).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A JSON scenario or lookup table failed to parse.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;
