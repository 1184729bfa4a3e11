use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The model, coefficient or scheme combination does not support the
    /// requested operation.
    #[error("unsupported: {0}")]
    Capability(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Wiener-Hopf root finding produced an inconsistent factorisation.
    #[error("factorisation failed: {0}")]
    Factorization(String),

    /// A scheme state became non-finite.
    #[error("numerical blow-up at step {step}")]
    NumericalBlowup { step: usize },

    /// An iterative solver failed to converge.
    #[error("solver failed: {0}")]
    Solver(String),

    /// Malformed configuration text.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn capability(msg: impl Into<String>) -> Error {
    Error::Capability(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
