//! Error type shared by every module in the crate.

use std::path::PathBuf;

/// Errors produced by corpus loading, embedding parsing, model I/O and the
/// numeric pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix was passed with a length that does not match the
    /// operation's contract.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A `.txt`/`.ann`/manifest/sidecar file violated the corpus format.
    #[error("corpus format error in {file}:{line}: {message}")]
    CorpusFormat {
        file: PathBuf,
        line: usize,
        message: String,
    },

    /// A word-vector file violated the textual embedding format.
    #[error("embedding format error at line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },

    /// A model file had a bad magic string, version, or inconsistent shapes.
    #[error("model serialization error: {0}")]
    Serialization(String),

    /// An operation was called with input outside its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
