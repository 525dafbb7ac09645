use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("malformed model document: {0}")]
    Format(String),

    #[error("shape mismatch in `{field}`: {message}")]
    Shape { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty sentence")]
    EmptySentence,

    #[error("empty batch")]
    EmptyBatch,

    #[error("length mismatch: {0} predictions vs {1} gold labels")]
    LengthMismatch(usize, usize),

    #[error("vocabulary mismatch between distributions")]
    VocabularyMismatch,

    #[error("empty vocabulary: {0}")]
    EmptyVocabulary(String),

    #[error("no lexicon overlap")]
    NoLexiconOverlap,

    #[error("no pivot candidates")]
    NoPivotCandidates,

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("non-finite loss at epoch {epoch}, step {step}; the learning rate is probably too high")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }
}
