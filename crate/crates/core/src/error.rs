use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("{op}: domain error: {detail}")]
    Domain { op: &'static str, detail: String },

    /// Invalid combination of arguments, flags or configuration keys.
    #[error("usage error: {0}")]
    Usage(String),

    /// An iteration failed to converge or produced a non-finite value.
    #[error("{op}: numerical error: {detail}")]
    Numerical {
        op: &'static str,
        detail: String,
        /// Best error bound reached before giving up, when one is known.
        achieved: Option<f64>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { op, detail: detail.into() }
    }

    pub(crate) fn usage(detail: impl Into<String>) -> Self {
        Error::Usage(detail.into())
    }

    pub(crate) fn numerical(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical { op, detail: detail.into(), achieved: None }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 0 success, 1 validation failure, 2 usage error, 3 numerical error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::Usage(_) | Error::Io { .. } => 2,
            Error::Numerical { .. } => 3,
        }
    }
}
