use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the tuning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("invalid catalog: {0}")]
    Catalog(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },

    #[error("invalid plan `{query_id}`: {message}")]
    Plan { query_id: String, message: String },

    #[error("column `{column}` belongs to table `{table}`, which the plan never scans")]
    UnscannedTable { table: String, column: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("advisor recommended {count} indexes but at most {k} are allowed")]
    ConstraintViolation { count: usize, k: usize },

    #[error("configuration holds {count} indexes, exceeding k = {k}")]
    ConfigurationTooLarge { count: usize, k: usize },

    #[error("template error: {0}")]
    Template(String),

    #[error("advisor service error: {0}")]
    Service(String),

    #[error("executor error: {0}")]
    Executor(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(what: &'static str, err: impl std::fmt::Display) -> Self {
        Error::Parse {
            what,
            message: err.to_string(),
        }
    }

    pub(crate) fn plan(query_id: &str, message: impl Into<String>) -> Self {
        Error::Plan {
            query_id: query_id.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input documents.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Service(_) | Error::Io { .. } | Error::Executor(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
