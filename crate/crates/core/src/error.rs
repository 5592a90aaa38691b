use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A run or campaign was configured inconsistently (copy budgets, physics parameters, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An exact enumeration would exceed its outcome bound.
    #[error("enumeration bound exceeded: {what} requires {required} outcomes (limit {limit})")]
    EnumerationBound {
        what: &'static str,
        required: u64,
        limit: u64,
    },

    #[error("no crossover between {a} and {b} on (0, 1)")]
    NoCrossover { a: String, b: String },

    /// A benchmark point failed; wraps the underlying error.
    #[error("{strategy} at c = {c}: {source}")]
    Point {
        strategy: String,
        c: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit error: {0}")]
    Fit(String),

    /// A configuration file key was unknown, mistyped or out of range.
    #[error("invalid config key `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            key: key.into(),
            message: message.into(),
        }
    }
}
