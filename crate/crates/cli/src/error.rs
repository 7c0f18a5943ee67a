use serde::Serialize;

use dml_core::DmlError;

/// An error reported to the user as one JSON object on standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { kind: "config".into(), message, row: None }
    }

    pub fn io(message: String) -> Self {
        CliError { kind: "io".into(), message, row: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<DmlError> for CliError {
    fn from(e: DmlError) -> Self {
        let row = match &e {
            DmlError::Ingestion { row, .. } => Some(*row),
            _ => None,
        };
        CliError { kind: e.kind().into(), message: e.to_string(), row }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}
