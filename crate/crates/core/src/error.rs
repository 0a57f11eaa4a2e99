use thiserror::Error;

/// Errors raised by the pooling toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument violates a precondition (range, ordering, size bound).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The constraints admit no design.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
