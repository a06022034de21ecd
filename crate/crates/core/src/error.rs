//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller handed in a value outside an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was invoked against state it cannot work with
    /// (e.g. a forward cache that does not belong to the model).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A point-wise mapping normalized to zero total mass.
    #[error("degenerate transform: {0}")]
    DegenerateTransform(String),

    /// A text document (CSV) failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    ParseLine { line: usize, msg: String },

    /// A structured document carried a field violating its schema.
    #[error("parse error in field `{field}`: {msg}")]
    ParseField { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn parse_field(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::ParseField {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn parse_line(line: usize, msg: impl Into<String>) -> Self {
        Error::ParseLine {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Reads a file to a string, attaching the path to any I/O error.
pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Writes a file, attaching the path to any I/O error.
pub fn write_file(path: impl AsRef<std::path::Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
