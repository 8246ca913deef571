use std::path::PathBuf;

use thiserror::Error;

use crate::policy::PolicyParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("no valid trajectory rows ({rejected} rejected)")]
    EmptyDataset { rejected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("file is not a `{expected}` container")]
    BadMagic { expected: String },
    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("checksum mismatch (payload truncated or corrupt)")]
    ChecksumMismatch,
    #[error("payload encoding error: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("no conditional data at node {node} for any cluster in the fallback order")]
    DeadEnd { node: usize },
    #[error("path step {from} -> {to} is not an edge of the graph")]
    Disconnected { from: usize, to: usize },
    #[error("negative gap {0} m")]
    NegativeGap(f64),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("episode did not terminate in a collision")]
    NotACollision,
    #[error("training diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        last_good: Box<PolicyParams>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
