use serde_json::{json, Value};
use thiserror::Error;

use rescaled_pressure::PressureError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    #[error("{0}")]
    Validation(String),
    /// Failure while running; exit code 1.
    #[error("{message}")]
    Runtime { message: String, payload: Value },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        let message = message.into();
        CliError::Runtime {
            payload: json!({ "error": "runtime", "message": message }),
            message,
        }
    }
}

impl From<PressureError> for CliError {
    fn from(e: PressureError) -> Self {
        let payload = match &e {
            PressureError::InfeasibleCover { max_mass, required } => json!({
                "error": "infeasible-cover",
                "message": e.to_string(),
                "max_mass": max_mass,
                "required": required,
            }),
            PressureError::DomainEscape { time } => json!({
                "error": "domain-escape",
                "message": e.to_string(),
                "time": time,
            }),
            PressureError::SingularOrbit { index } => json!({
                "error": "singular-orbit",
                "message": e.to_string(),
                "index": index,
            }),
            _ => json!({ "error": "runtime", "message": e.to_string() }),
        };
        CliError::Runtime {
            message: e.to_string(),
            payload,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(format!("i/o error: {e}"))
    }
}
