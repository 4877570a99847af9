//! Error type for the IO / orchestration layer.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] waferlite_core::Error),

    #[error("io error on {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    ParseAt { path: PathBuf, line: usize, msg: String },

    #[error("unsupported image format in {path}: {msg}")]
    ImageFormat { path: PathBuf, msg: String },

    #[error("weight store: bad magic (not a weight file)")]
    BadMagic,

    #[error("weight store: unsupported version {0}")]
    BadVersion(u8),

    #[error("weight store: truncated or malformed payload: {0}")]
    Payload(String),

    #[error("weight store: missing tensor '{0}'")]
    MissingTensor(String),

    #[error("weight store: tensor '{name}' has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }
}
