//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration was internally inconsistent or unsupported.
    #[error("configuration error: {0}")]
    Config(String),

    /// A combination of options that is valid syntax but not implemented
    /// (e.g. exact Gittins indices for non-Bernoulli arms).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A numerical procedure failed to converge or produced a non-finite
    /// value where a finite one was required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
