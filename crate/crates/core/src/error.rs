use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The quantizer structure is malformed or not supported by any packing.
    #[error("invalid quantizer spec: {0}")]
    InvalidSpec(String),

    /// Caller-supplied data has the wrong shape or contains non-finite values.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training failed: {0}")]
    Training(String),

    /// A code or file carries values that cannot have been produced by this crate.
    #[error("corrupt data: {0}")]
    Corruption(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Components disagree with each other (e.g. tables built for another spec).
    #[error("configuration mismatch: {0}")]
    Config(String),

    /// A spec given on the command line or in a file disagrees with an index.
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("build failed: {0}")]
    Build(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corruption(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
