//! Error types shared by all modules.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a physical or mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver failed to converge.
    #[error("solver error: {0}")]
    Solver(String),

    /// A time integrator failed (step underflow, tolerance violation).
    #[error("integrator error: {0}")]
    Integrator(String),

    /// Pulse-sequence text could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A fit did not converge or the data cannot constrain the model.
    #[error("fit error: {0}")]
    Fit(String),

    /// An input file did not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub fn integrator(msg: impl Into<String>) -> Self {
        Error::Integrator(msg.into())
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn parse(line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
