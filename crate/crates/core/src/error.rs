use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The queue is not stable at the requested load, so the quantity is undefined.
    #[error("stability violation: {0}")]
    Unstable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
