use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("block (doc {doc}, word {word}) does not exist")]
    UnknownBlock { doc: usize, word: usize },

    #[error("block counts sum to {got}, expected {expected}")]
    CountMismatch { expected: u64, got: u64 },

    #[error("corpus has no tokens")]
    EmptyCorpus,

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("numerical range exceeded: {0}")]
    Numerical(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

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

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
