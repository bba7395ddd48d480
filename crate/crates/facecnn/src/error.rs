//! Crate-wide error type and result alias.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A size, shape, or option that violates a documented contract.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad PGM header at byte {offset}: {reason}")]
    PgmHeader {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("{path}: unsupported PGM maxval {maxval} at byte {offset}")]
    PgmMaxval {
        path: PathBuf,
        offset: usize,
        maxval: u32,
    },

    #[error("{path}: truncated PGM payload at byte {offset}: expected {expected} pixels, got {got}")]
    PgmTruncated {
        path: PathBuf,
        offset: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}: bad PGM payload at byte {offset}: {reason}")]
    PgmPayload {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("{path}: unsupported checkpoint version {found:?} (expected {expected})")]
    CheckpointVersion {
        path: PathBuf,
        found: String,
        expected: u32,
    },

    #[error("{path}: malformed checkpoint at line {line}: {reason}")]
    CheckpointParse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: checkpoint shape mismatch: {reason}")]
    CheckpointShape { path: PathBuf, reason: String },

    #[error("{path}: non-finite checkpoint value at parameter index {index}")]
    CheckpointNonFinite { path: PathBuf, index: usize },

    #[error("dataset error at {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
