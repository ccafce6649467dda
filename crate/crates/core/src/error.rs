use thiserror::Error;

/// Errors produced by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel is not irreducible: state {0} cannot reach every other state")]
    NotIrreducible(usize),
    #[error("chain is periodic with period {0}")]
    Periodic(usize),
    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("problem too large: size {0} exceeds the limit")]
    TooLarge(u128),
    #[error("cell {0} has zero invariant mass")]
    DegenerateCell(usize),
    #[error("observable is not square integrable on the grid: {0}")]
    NotIntegrable(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("replica {index} failed: {source}")]
    Replica { index: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
