//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed line in a data file (corpus, lexicon, concept resources, config).
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    /// Syntax error in the rule DSL, with line and column.
    #[error("{path}:{line}:{col}: {msg}")]
    Syntax {
        path: String,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("unknown entity type {0:?}")]
    UnknownEntityType(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    /// Mentions passed to the BIO encoder overlap.
    #[error("overlapping mentions: {0}")]
    Overlap(String),

    /// Malformed BIO sequence while decoding with repair disabled.
    #[error("invalid BIO sequence at position {pos}: {msg}")]
    Decode { pos: usize, msg: String },

    #[error("annotation source {0:?} not present")]
    MissingSource(String),

    /// A structural invariant of the data model is violated.
    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Bad generator or training configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Corrupt or incompatible model file.
    #[error("model error: {0}")]
    Model(String),

    /// Inconsistent resources (dangling concept ids, vocab/type mismatch,
    /// report metadata mismatch).
    #[error("resource mismatch: {0}")]
    Resource(String),
}

/// Coarse category used by the command-line frontend to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Data or format problem (exit code 2).
    Data,
    /// Model or resource mismatch (exit code 3).
    ModelResource,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Model(_) | Error::Resource(_) => ErrorCategory::ModelResource,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
