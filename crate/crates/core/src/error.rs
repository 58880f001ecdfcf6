use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("count underflow moving token (instance {l}, category {s}) out of cluster {k}")]
    CountUnderflow { l: usize, s: usize, k: usize },

    #[error("count constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("slice sampler failed: {0}")]
    SliceFailure(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("instance id `{0}` missing from {1}")]
    MissingInstance(String, String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::InvalidData(_)
            | Error::Parse { .. }
            | Error::MissingInstance(..)
            | Error::Io { .. }
            | Error::DimensionMismatch(_) => 2,
            Error::NonFinite(_)
            | Error::CountUnderflow { .. }
            | Error::ConstraintViolation(_)
            | Error::SliceFailure(_) => 3,
        }
    }
}
