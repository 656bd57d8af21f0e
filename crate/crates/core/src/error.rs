//! Error taxonomy shared by the library and the CLI.
//!
//! Variants map onto process exit codes: usage/configuration problems exit
//! with 2, data problems with 3, numeric failures with 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller misuse: dimension mismatches, invalid flags, bad configs.
    #[error("usage error: {0}")]
    Usage(String),

    /// Problems with input data: missing files, unmapped values, empty results.
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values encountered during computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
