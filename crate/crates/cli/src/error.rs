use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_EXCEEDANCE: i32 = 3;
pub const EXIT_INFRASTRUCTURE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Input rejected or processing failed.
    #[error("{message}")]
    Failure {
        code: &'static str,
        message: String,
        details: Option<Value>,
    },
    /// File system, process or service trouble unrelated to the input content.
    #[error("{0}")]
    Infrastructure(String),
}

impl CliError {
    pub fn failure(code: &'static str, message: impl ToString) -> Self {
        CliError::Failure {
            code,
            message: message.to_string(),
            details: None,
        }
    }

    pub fn usage(message: impl ToString) -> Self {
        CliError::Usage(message.to_string())
    }

    pub fn infra(message: impl ToString) -> Self {
        CliError::Infrastructure(message.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure { .. } => EXIT_FAILURE,
            CliError::Infrastructure(_) => EXIT_INFRASTRUCTURE,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, code, details) = match self {
            CliError::Usage(_) => ("usage", "USAGE", None),
            CliError::Failure { code, details, .. } => ("failure", *code, details.clone()),
            CliError::Infrastructure(_) => ("infrastructure", "INFRASTRUCTURE", None),
        };
        let mut body = json!({
            "kind": kind,
            "code": code,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Some(d) = details {
            body["details"] = d;
        }
        json!({ "error": body }).to_string()
    }
}
