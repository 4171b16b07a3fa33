//! Error type shared across the pipeline.
//!
//! Every error maps to one of the CLI exit classes: configuration (2),
//! staged dependency (3), data integrity (4), numeric/model (5).

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value; the message names the violated bound.
    #[error("configuration error: {0}")]
    Config(String),

    /// A staged command was run before the stage that produces its input.
    #[error("staged dependency error: missing artifact {path}: {detail}")]
    StagedDependency { path: PathBuf, detail: String },

    /// CSV header does not match the canonical schema.
    #[error("schema error: missing columns: {}", .missing.join(", "))]
    Schema { missing: Vec<String> },

    /// A cell failed to parse; addressed by line number and column name.
    #[error("parse error at line {line}, column {column}: {detail}")]
    Parse {
        line: usize,
        column: String,
        detail: String,
    },

    /// Dataset-level invariant violation (duplicate keys, unbalanced panel,
    /// out-of-range values).
    #[error("data integrity error: {0}")]
    Integrity(String),

    /// Operation applied to a domain it is undefined on (empty dataset,
    /// single-class labels, empty training slice).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimension mismatch between a model and the rows it is applied to.
    #[error("shape error: {0}")]
    Shape(String),

    /// Numeric or model-integrity failure (zero-cover node, bad objective).
    #[error("model error: {0}")]
    Model(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Exit code the CLI reports for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::StagedDependency { .. } => 3,
            Error::Schema { .. }
            | Error::Parse { .. }
            | Error::Integrity(_)
            | Error::Io { .. } => 4,
            Error::Domain(_) | Error::Shape(_) | Error::Model(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
