use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: {0}")]
    Format(String),

    #[error("table dynamic range {d_max} is not an integral multiple of resolution {resolution}")]
    TableSize { d_max: f64, resolution: f64 },

    #[error("log difference must be nonnegative, got {0}")]
    NegativeDifference(f64),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("bad IDX magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },

    #[error("truncated file {path}: expected {expected} bytes of payload, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("unsupported image geometry {rows}x{cols}, expected 28x28")]
    Geometry { rows: usize, cols: usize },

    #[error("file not found: {0}")]
    MissingPath(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error("invalid experiment: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingPath(path)
        } else {
            Error::Io { path, source }
        }
    }
}
