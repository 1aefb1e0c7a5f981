use thiserror::Error;

/// Errors raised by the sampler library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A matrix factorization or other numeric routine failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An input fell outside the domain where a closed form is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampler run could not continue.
    #[error("run aborted at iteration {iteration}: {reason}")]
    Aborted { iteration: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
