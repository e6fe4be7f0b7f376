use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },

    #[error("empty network: {0}")]
    EmptyNetwork(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("rank-deficient design at station {station}")]
    RankDeficient { station: String },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("stale artifact chain: {0}")]
    HashMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
