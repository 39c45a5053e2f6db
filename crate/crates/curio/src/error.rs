//! Crate-wide error type.

use std::path::PathBuf;

/// Errors surfaced by configuration loading and experiment I/O.
///
/// Numerical hot paths (network forward/backward, environment stepping)
/// treat shape mismatches and non-finite inputs as programmer error and
/// panic instead; see the module docs of [`crate::numerics`] and
/// [`crate::env`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to {action} {path}")]
    Io {
        action: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(action: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            action,
            path: path.into(),
            source,
        }
    }
}
