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

    #[error("format error: {0}")]
    Format(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid identifier {0:?}")]
    InvalidId(String),

    #[error("usage counts are all zero")]
    EmptyUsage,

    #[error("no signature survived aggregation (min_support = {min_support})")]
    EmptyDataset { min_support: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no class of the signature is known to the model")]
    UnknownSignature,

    #[error("unknown entity {0:?}")]
    UnknownEntity(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage/IO, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Config(_) => 2,
            Error::Divergence { .. } => 4,
            Error::Fold { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
