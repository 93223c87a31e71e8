use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind} not found: {key}")]
    NotFound { kind: &'static str, key: String },

    #[error("invalid range: {from} is after {to}")]
    InvalidRange { from: String, to: String },

    #[error("idf undefined for keyword {0:?}: it occurs in no document")]
    UndefinedScore(String),

    #[error("topic has no keywords")]
    EmptyTopic,

    #[error("no embedding available for {0}")]
    NoEmbedding(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("series has {len} buckets, need at least {needed}")]
    InsufficientData { len: usize, needed: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("topic {0:?} already exists")]
    TopicExists(String),

    #[error("store at {} is locked by a running service", .0.display())]
    StoreLocked(PathBuf),

    #[error("unsupported store format in {path}: {found}")]
    StoreFormat { path: PathBuf, found: String },

    #[error("failed to load {what}: {source}")]
    LoadFailure {
        what: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn not_found(kind: &'static str, key: impl Into<String>) -> Self {
        Error::NotFound {
            kind,
            key: key.into(),
        }
    }
}
