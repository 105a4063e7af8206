use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{}:{line}: {message}", file.display())]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty supervision set{0}")]
    EmptySupervision(String),

    #[error("degenerate branch: {0}")]
    DegenerateBranch(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFinite(String),

    #[error("stale forward cache: parameter `{name}` changed since the forward pass")]
    StaleCache { name: String },

    #[error("ensemble has no branches")]
    EmptyEnsemble,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("branch {index}: {source}")]
    Branch {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            left: left.into(),
            right: right.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
