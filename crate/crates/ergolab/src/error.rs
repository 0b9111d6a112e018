//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A driver, space, or map description is malformed.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A point or argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index exceeds the data available (e.g. a table cocycle queried
    /// beyond its stored length).
    #[error("{what}: index {index} exceeds maximum {max}")]
    OutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },

    /// A numerical routine lost too much precision to continue.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Good-time detection produced an empty set where one was required.
    #[error("no good times found: {0}; recalibrate the tolerance schedule or lower rho")]
    NoGoodTimes(String),

    /// An experiment configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
