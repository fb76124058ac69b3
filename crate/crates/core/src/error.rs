use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus contains no usable sentences")]
    EmptyCorpus,

    #[error("corpus too small: {0}")]
    InsufficientCorpus(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sentence has no in-vocabulary tokens")]
    EmptySentence,

    #[error("cosine undefined for a zero-norm vector")]
    ZeroVector,

    #[error("invalid example: {0}")]
    InvalidExample(String),

    #[error("corrupted state: {0}")]
    Corrupted(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot serialize: {0}")]
    Serialization(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
