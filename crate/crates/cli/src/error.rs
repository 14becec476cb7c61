use serde::Serialize;
use stochkit::Error as CoreError;

/// Exit status for a bad command line or unknown subcommand.
pub const EXIT_USAGE: i32 = 2;
/// Malformed or invalid input data or parameters.
pub const EXIT_INPUT: i32 = 3;
/// Input file missing or unreadable, or output not writable.
pub const EXIT_IO: i32 = 4;
/// Numerical failure during a computation.
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip)]
    pub code: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage", message: message.into(), line: None, path: None, code: EXIT_USAGE }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: "invalid-input", message: message.into(), line: None, path: None, code: EXIT_INPUT }
    }

    pub fn io(path: &str, err: &std::io::Error) -> Self {
        let kind = if err.kind() == std::io::ErrorKind::NotFound { "missing-file" } else { "io" };
        Self { kind, message: format!("{path}: {err}"), line: None, path: Some(path.into()), code: EXIT_IO }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: &'a CliError,
            exit_code: i32,
        }
        crate::output::to_json(&Envelope { error: self, exit_code: self.code })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        let (kind, code, line) = match &e {
            CoreError::Parse { line, .. } => ("malformed-input", EXIT_INPUT, Some(*line)),
            CoreError::Model(_) => ("schema", EXIT_INPUT, None),
            CoreError::InvalidParameter { .. }
            | CoreError::InvalidRange { .. }
            | CoreError::InvalidGrid(_)
            | CoreError::Allocation(_)
            | CoreError::InsufficientData(_)
            | CoreError::Unsupported(_) => ("invalid-input", EXIT_INPUT, None),
            _ => ("numerical", EXIT_NUMERICAL, None),
        };
        Self { kind, message, line, path: None, code }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self { kind: "schema", message: e.to_string(), line: Some(e.line() as u64), path: None, code: EXIT_INPUT }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
