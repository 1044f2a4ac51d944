use std::path::PathBuf;

use qmh_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed JSON or a field of the wrong type, with the parser's position.
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    /// Well-formed input that violates a field constraint.
    #[error("{path}: field `{field}`: {message}")]
    Field { path: String, field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn field(path: &str, field: &str, message: impl Into<String>) -> Self {
        CliError::Field { path: path.to_string(), field: field.to_string(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: &str, e: &serde_json::Error) -> Self {
        let text = e.to_string();
        let message = match text.rsplit_once(" at line ") {
            Some((m, _)) => m.to_string(),
            None => text,
        };
        CliError::Parse { path: path.to_string(), line: e.line(), column: e.column(), message }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
