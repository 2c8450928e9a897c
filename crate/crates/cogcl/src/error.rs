//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the training engine.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {malformed} of {total} lines malformed (limit 1%)")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
    },
    #[error("dataset eliminated by filtering")]
    DatasetEliminated,
    #[error("dataset format version mismatch: file has {found}, this build expects {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("corrupted {what}: {detail}")]
    Corrupted { what: String, detail: String },
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },
    #[error("non-finite loss: {breakdown}")]
    NonFiniteLoss { breakdown: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
