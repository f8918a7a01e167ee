use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot decode PNG {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("unsupported PNG format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("value space: {0}")]
    Space(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("non-finite loss term `{term}` at step {step}")]
    NonFinite { term: &'static str, step: u64 },
    #[error("checkpoint corrupt: {0}")]
    Corrupt(String),
    #[error("checkpoint config digest {found} does not match expected {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::Shape(_)
                | Error::Space(_)
                | Error::Manifest(_)
                | Error::DigestMismatch { .. }
                | Error::NotFound(_)
        )
    }
}
