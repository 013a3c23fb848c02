use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A second eviction-scoring policy was registered on one runtime.
    #[error("policy conflict: {0}")]
    Conflict(String),

    /// An event arrived with a tick lower than one already dispatched.
    #[error("event out of order: tick {got} after {last}")]
    Ordering { last: u64, got: u64 },

    #[error("validation failed: {0}")]
    Validation(String),

    /// The oracle was asked for a problem size it does not handle.
    #[error("refused: {0}")]
    Refused(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
