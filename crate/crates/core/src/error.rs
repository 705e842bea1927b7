use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 in input at byte offset {offset}")]
    Decode { offset: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("vocabulary too small: {0} words, need at least 2")]
    VocabularyTooSmall(usize),

    #[error("word not in vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("training diverged at step {step}")]
    TrainingDiverged { step: u64 },

    #[error("zero-norm vector for word {0:?}")]
    DegenerateVector(String),

    #[error("count {count} for word {word:?} leaves log normalizer undefined")]
    UndefinedNormalizer { word: String, count: u64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
