use thiserror::Error;

/// Errors raised by the estimation, bound and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value {value} at {location:?}")]
    NonFinite { location: Vec<f64>, value: f64 },

    #[error("supremum reached the search boundary lambda_max = {lambda_max}")]
    SearchBoundary { lambda_max: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A Monte Carlo replication produced a non-finite estimate.
    #[error("replication {replication} (seed {seed}) produced a non-finite estimate")]
    Replication { replication: usize, seed: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
