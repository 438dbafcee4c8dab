//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Malformed {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate {what} identifier: {id}")]
    DuplicateId { what: &'static str, id: String },

    #[error("dangling reference: {what} {id} is not defined")]
    DanglingRef { what: &'static str, id: String },

    #[error("invalid {what}: {msg}")]
    Invalid { what: &'static str, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("gateway error: {0}")]
    Gateway(String),

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("generation stage failed: {0}")]
    Generation(String),

    #[error("audit gate closed: {0}")]
    AuditGate(String),

    #[error("empty pairing: runs {a} and {b} share no scored queries")]
    EmptyPairing { a: String, b: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            msg: msg.into(),
        }
    }
}
