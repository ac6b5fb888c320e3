//! Error taxonomy shared by all modules.
//!
//! Three families matter operationally: configuration errors (rejected inputs),
//! numeric errors (factorization/overflow trouble) and convergence errors
//! (iterations that ran out of budget). The CLI maps them to distinct exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("convergence: {message}")]
    Convergence {
        message: String,
        /// Per-iteration diagnostic (residuals or increment norms), oldest first.
        history: Vec<f64>,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn convergence(msg: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Convergence {
            message: msg.into(),
            history,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
