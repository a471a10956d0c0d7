use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The problem data violates a structural hypothesis.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function evaluation produced a non-finite value.
    #[error("numeric error at u = {at:e}: {message}")]
    Numeric { at: f64, message: String },

    /// An iterative solver did not converge.
    #[error("solver error: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
