use thiserror::Error;

/// Errors raised by the estimation, oracle and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No sample point carries positive kernel weight at the evaluation point.
    #[error("empty window at {theta}: no sample point has positive kernel weight")]
    EmptyWindow { theta: String },

    /// A symmetric matrix that must be positive definite is not.
    #[error("singular matrix at {context}: smallest eigenvalue below {threshold:e}")]
    Singular { context: String, threshold: f64 },

    /// Damped Newton iteration for the population first-order condition failed.
    #[error("newton did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    /// A scheme, config or file failed validation.
    #[error("invalid {what}: {message}")]
    Invalid { what: String, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
