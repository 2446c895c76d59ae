use thiserror::Error;

/// Errors raised by the model algebra, solvers, and experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of a numerical routine (non-PD covariance,
    /// non-stochastic table, dimension mismatch).
    #[error("domain error: {0}")]
    Domain(String),

    /// Problem instance too large for an enumeration-based routine.
    #[error("size error: {0}")]
    Size(String),

    /// Invalid or unparseable experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
