use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("lexical error at line {line}: {message}")]
    Lex { line: u32, message: String },

    #[error("syntax error at line {line}: {message}")]
    Syntax { line: u32, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("unknown split `{0}`")]
    UnknownSplit(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing estimator state: {0}")]
    MissingState(String),

    #[error("metric undefined: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::UnknownSplit(_)
                | Error::Checkpoint(_)
                | Error::MissingState(_)
                | Error::Empty(_)
                | Error::Undefined(_)
        )
    }
}
