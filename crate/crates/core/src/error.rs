use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vocabulary (no word reaches min_count)")]
    EmptyVocabulary,

    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("operation requires a {expected} model, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: ModelKind,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),

    #[error("model file: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by caller-supplied arguments rather than by
    /// the data or model files they point at.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::KindMismatch { .. }
        )
    }
}
