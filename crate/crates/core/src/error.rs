use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: usize, message: String },

    #[error("no snapshot stored for {0}")]
    SnapshotNotFound(NaiveDate),

    #[error("snapshot for {0} already exists")]
    SnapshotExists(NaiveDate),

    #[error("integrity check failed for {path}: {detail}")]
    Integrity { path: PathBuf, detail: String },

    #[error("dates out of order: {earlier} must precede {later}")]
    Ordering {
        earlier: NaiveDate,
        later: NaiveDate,
    },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown {kind} referenced: {id}")]
    UnknownReference { kind: &'static str, id: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed after {written} item(s): {source}")]
    Sink {
        written: usize,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(input: &[u8], err: &serde_json::Error) -> Self {
        Error::Json {
            offset: byte_offset(input, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

/// Converts serde_json's 1-based line/column position into a byte offset.
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current = 1;
    let mut line_start = 0;
    for (i, b) in input.iter().enumerate() {
        if current == line {
            break;
        }
        if *b == b'\n' {
            current += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(input.len())
}
