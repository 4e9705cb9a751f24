use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated one of its documented invariants.
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    /// Malformed text input. Lines are 1-based.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An operation that is undefined on empty input (e.g. a percentile).
    #[error("{0} is empty")]
    Empty(&'static str),

    /// Internal state machine misuse. Indicates an engine bug rather than bad input.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
