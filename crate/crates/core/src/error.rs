use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the mixing engine.
///
/// Every variant maps onto one of the process exit codes used by the `bdm`
/// binary: configuration problems exit with 2, bad or unreadable data with 3
/// and broken internal invariants with 4.
#[derive(Debug, Error)]
pub enum BdmError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Codec { path: PathBuf, message: String },

    #[error("bank unusable: {0}")]
    BankUnusable(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl BdmError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn codec(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Codec {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_)
            | Self::Io { .. }
            | Self::Codec { .. }
            | Self::BankUnusable(_)
            | Self::OutOfRange(_) => 3,
            Self::Invariant(_) => 4,
        }
    }
}

pub type Result<T, E = BdmError> = std::result::Result<T, E>;
