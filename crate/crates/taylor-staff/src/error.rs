//! Crate-wide error type.
//!
//! Errors are split by how a caller should react: `Invalid` marks a
//! violated precondition or malformed input, `NonConvergence` marks an
//! iterative numerical procedure that ran out of budget, and the I/O
//! variants wrap file and CSV failures. The CLI maps these onto distinct
//! process exit codes.

use thiserror::Error;

/// Unified error type for all library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain precondition or input validation failed.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An iterative numerical procedure failed to converge within its
    /// budget. The message carries the diagnostic trace summary.
    #[error("failed to converge: {0}")]
    NonConvergence(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input; the inner error names the offending position.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for building an [`Error::Invalid`] from format arguments.
macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::Invalid(format!($($arg)*))
    };
}
pub(crate) use invalid;
