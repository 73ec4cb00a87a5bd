use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// A text input could not be parsed. `line` and `column` are 1-based.
    #[error("{source_name}: line {line}, column {column}: {message}")]
    Parse {
        source_name: &'static str,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate sequence id {0:?}")]
    DuplicateId(String),

    #[error("sequence {id:?} has length {len}, needs at least {need}")]
    SequenceTooShort { id: String, len: usize, need: usize },

    #[error("empty corpus: no documents left after filtering")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vocabulary too small: {0} tokens, need at least {1}")]
    VocabularyTooSmall(usize, usize),

    #[error("no known tokens in document")]
    NoKnownTokens,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("need at least {need} usable families, found {found}")]
    TooFewFamilies { need: usize, found: usize },

    #[error("family {family:?} has {size} members, needs at least {min}")]
    FamilyTooSmall { family: String, size: usize, min: usize },

    #[error("negative pool for family {family:?} has {available} sequences, needs {needed}")]
    NegativePoolTooSmall {
        family: String,
        available: usize,
        needed: usize,
    },

    #[error("missing label for sequence {0:?}")]
    MissingLabel(String),

    #[error("all confusion counts are zero")]
    NoExamples,

    /// Malformed binary model file. `offset` is the byte position where decoding failed.
    #[error("model file, byte {offset}: {message}")]
    ModelFormat { offset: usize, message: String },
}

impl Error {
    pub(crate) fn parse(source_name: &'static str, line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name,
            line,
            column,
            message: message.into(),
        }
    }
}
