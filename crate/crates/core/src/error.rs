use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input data violates a domain invariant (non-finite values, too few rows, ...).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// Caller broke an operation precondition (mismatched lengths, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Fitting or solving failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
