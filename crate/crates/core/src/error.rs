use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("repository root {0} does not exist")]
    RootNotFound(PathBuf),

    #[error("repository root {0} is not a directory")]
    NotADirectory(PathBuf),

    #[error("invalid ignore pattern `{pattern}`: {reason}")]
    IgnorePattern { pattern: String, reason: String },

    #[error("duplicate file `{0}` in snapshot")]
    DuplicateFile(String),

    #[error("file `{0}` is not part of the snapshot")]
    UnknownFile(String),

    #[error("line range [{start}, {end}] is out of bounds for `{path}` ({len} lines)")]
    Range {
        path: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("invalid pattern `{pattern}`: {reason}")]
    Pattern { pattern: String, reason: String },

    #[error("protocol error: {reason} (record: {record})")]
    Protocol { record: String, reason: String },

    #[error("external generator failed: {0}")]
    Generator(String),

    #[error("invalid task `{task_id}`: {reason}")]
    InvalidTask { task_id: String, reason: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty golden context for task `{0}`")]
    EmptyGold(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
