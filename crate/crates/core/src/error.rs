//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A token in an input file could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// Inputs violate a documented precondition or invariant.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A binary or structured file does not follow its declared format.
    #[error("bad file format: {0}")]
    Format(String),

    /// A numeric argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exhaustive enumeration would exceed the configured state budget.
    #[error("enumeration budget exceeded: {needed} states > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
