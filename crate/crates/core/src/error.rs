// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use crate::vocab::Fingerprint;

/// Errors produced anywhere in the engine.
///
/// Variants are grouped so the CLI can map them onto stable exit codes:
/// usage problems, data problems and transport problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vocabulary is empty after filtering tokens with count < {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("not a probability distribution: {0}")]
    InvalidDistribution(String),

    #[error(
        "ensemble-incompatible providers: {left_name} ({left}, |V|={left_size}) vs {right_name} ({right}, |V|={right_size})"
    )]
    Incompatible {
        left_name: String,
        left: Fingerprint,
        left_size: usize,
        right_name: String,
        right: Fingerprint,
        right_size: usize,
    },

    #[error("unknown candidate token(s): {}", .0.join(", "))]
    UnknownTokens(Vec<String>),

    #[error("{path}:{line}: {message}")]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Dataset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("generation step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Transport,
}

impl Error {
    pub fn data(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Transport(_) | Error::Protocol(_) => ErrorKind::Transport,
            Error::AtStep { source, .. } | Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
