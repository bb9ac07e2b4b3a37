use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("insufficient input: {0}")]
    InsufficientInput(String),

    #[error("insufficient data: need at least {needed} items, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("incompatible statistics: backend {left:?} vs {right:?}")]
    IncompatibleStats { left: String, right: String },

    #[error("invalid distortion spec: {0}")]
    Spec(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
