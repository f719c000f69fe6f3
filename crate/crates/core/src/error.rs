use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be parsed. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate unit identifier {0}")]
    DuplicateUnit(String),

    #[error("duplicate document identifier {0}")]
    DuplicateDocument(String),

    #[error("duplicate example_id {0}")]
    DuplicateExample(String),

    #[error("index format version {found} is not supported (expected {expected})")]
    IndexVersion { found: String, expected: u32 },

    #[error("index integrity check failed: {0}")]
    IndexIntegrity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("example {example_id}: masked {slot} value occurs in the prompt input")]
    Leakage { example_id: String, slot: String },

    #[error("no gold entry for {} prediction(s): {}", .0.len(), .0.join(", "))]
    MissingGold(Vec<String>),

    #[error("example {example_id} has {found} candidates but hits@{k} was requested")]
    InsufficientCandidates {
        example_id: String,
        found: usize,
        k: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
