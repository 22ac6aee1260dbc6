use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value failed a domain-type invariant at construction.
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    /// An operation was called outside its precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gain is undefined when both scores are zero")]
    UndefinedGain,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}:{column}: malformed input: {message}", path.display())]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: unknown schema_version {found:?} (expected {expected:?})", path.display())]
    Schema {
        path: PathBuf,
        found: String,
        expected: &'static str,
    },

    #[error("{}: record {index}, field `{field}`: {message}", path.display())]
    Record {
        path: PathBuf,
        index: usize,
        field: String,
        message: String,
    },

    #[error("{}: image error: {message}", path.display())]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(detail: impl Into<String>) -> Self {
        Error::Contract(detail.into())
    }
}
