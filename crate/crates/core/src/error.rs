use std::path::PathBuf;

use crate::blockwise::PartitionViolation;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid block partition: {0}")]
    Partition(PartitionViolation),

    #[error("singular pooled covariance: {component}")]
    Singular { component: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {detail}")]
    Load { path: PathBuf, detail: String },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
