use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A process specification failed its finiteness or parameter checks.
    #[error("invalid specification: {0}")]
    Validation(String),
    /// The caller asked for something structurally impossible.
    #[error("usage error: {0}")]
    Usage(String),
    /// A numerical routine did not converge. `partial_log` carries the last
    /// log-scale estimate when one exists.
    #[error("numeric failure: {message}")]
    Numeric {
        message: String,
        partial_log: Option<f64>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            partial_log: None,
        }
    }

    /// Attach context (for instance a replicate index) to the message.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
            Error::Usage(m) => Error::Usage(format!("{ctx}: {m}")),
            Error::Numeric {
                message,
                partial_log,
            } => Error::Numeric {
                message: format!("{ctx}: {message}"),
                partial_log,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
