//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error. Variants map onto the CLI exit codes: input problems
/// exit 2, numeric divergence 3, degenerate data 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed files, invalid configuration, or rejected input values.
    #[error("input error: {0}")]
    Input(String),
    /// A value outside the mathematical domain of an operation, e.g. a
    /// latent value beyond the attainable range of a bounded transform.
    #[error("domain error: {0}")]
    Domain(String),
    /// Data that makes an estimator undefined (zero variance, singular
    /// design matrix, series too short).
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// Non-finite or exploding intermediate state during integration or
    /// training.
    #[error("numeric divergence: {0}")]
    Divergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence(_) => 3,
            Error::Degenerate(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
