//! Error type shared by all pipeline stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A geometric singularity (zero range, coincident points).
    #[error("singularity: {0}")]
    Singularity(String),

    /// A root, peak or solution does not exist in the searched set.
    #[error("not found: {0}")]
    NotFound(String),

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Two rasters that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
