use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    /// The XML stream itself is broken; parsing cannot continue.
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    /// One record could not be turned into a citation.
    #[error("record {index} (byte {offset}): {message}")]
    Record {
        index: usize,
        offset: u64,
        message: String,
    },

    /// A line-oriented input (JSONL, TSV, CSV) is invalid.
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("unknown descriptor: {0}")]
    UnknownDescriptor(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid model: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        Error::Line {
            line,
            message: message.into(),
        }
    }
}
