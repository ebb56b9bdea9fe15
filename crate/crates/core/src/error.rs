use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {from} -> {to} would create a directed cycle")]
    Cycle { from: String, to: String },

    #[error("self-loop on {0}")]
    SelfLoop(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("node sets differ: {0}")]
    NodeSetMismatch(String),

    #[error("dataset contains missing cells; impute before {0}")]
    MissingData(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,

    #[error("elimination would build a factor with {entries} entries (limit {limit}); use sampling instead")]
    TreewidthTooLarge { entries: u128, limit: u128 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }
}
