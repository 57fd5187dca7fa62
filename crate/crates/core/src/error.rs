use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators, samplers and the experiment harness.
#[derive(Debug, Error)]
pub enum CsdlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CsdlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CsdlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 = bad input or parameters, 2 = filesystem trouble, 3 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CsdlError::Dimension(_)
            | CsdlError::Parameter(_)
            | CsdlError::Input(_)
            | CsdlError::Parse { .. } => 1,
            CsdlError::Io { .. } => 2,
            CsdlError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(_) => 2,
                _ => 1,
            },
            CsdlError::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CsdlError>;
