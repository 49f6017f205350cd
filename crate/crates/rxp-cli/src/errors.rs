//! CLI error taxonomy: every failure maps to an exit code and a
//! machine-readable JSON object on stderr.

use std::fmt;

use rxp_core::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration / arguments. Exit code 2.
    Config(String),
    /// Filesystem failure. Exit code 3.
    Io(String),
    /// Everything else (numerical failures, unmet preconditions at
    /// runtime). Exit code 1.
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Runtime(m) => m,
        }
    }

    /// stderr payload: `{"error":{"kind":...,"message":...}}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.message() }
        })
        .to_string()
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        CliError::Io(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(inner) => CliError::Io(inner.to_string()),
            CoreError::Json(inner) => CliError::Config(inner.to_string()),
            CoreError::InvalidArgument(_)
            | CoreError::InvalidArchitecture(_)
            | CoreError::ParseError { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
