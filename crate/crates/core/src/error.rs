use thiserror::Error;

/// Errors raised by the model, solvers and simulation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("transition matrix is reducible: {0}")]
    Reducible(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
