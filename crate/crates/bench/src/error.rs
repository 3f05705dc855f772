use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error(transparent)]
    Compute(#[from] pihqcd::Error),
}

impl BenchError {
    /// 1 for computation failures, 2 for usage and IO problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Compute(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }

    pub fn input(path: &Path, message: impl ToString) -> Self {
        BenchError::Input { path: path.to_path_buf(), message: message.to_string() }
    }
}

macro_rules! compute_from {
    ($($t:ty),*) => {$(
        impl From<$t> for BenchError {
            fn from(e: $t) -> Self {
                BenchError::Compute(e.into())
            }
        }
    )*};
}

compute_from!(pihqcd::error::OptError, pihqcd::error::SimError, pihqcd::error::LinearizeError, pihqcd::error::EncodeError);

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
