use std::fmt;
use std::path::Path;

use serde_json::json;

/// Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed { kind: &'static str, message: String },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    pub fn failed(kind: &'static str, message: impl fmt::Display) -> Self {
        Self::Failed { kind, message: message.to_string() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::failed("io", format!("{}: {e}", path.display()))
    }

    pub fn input(path: &Path, message: String) -> Self {
        Self::failed("input", format!("{}: {message}", path.display()))
    }

    pub fn csv(e: csv::Error) -> Self {
        Self::failed("io", e)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Failed { .. } => 1,
        }
    }

    pub fn record(&self) -> serde_json::Value {
        match self {
            Self::Usage(m) => json!({ "error": { "kind": "usage", "message": m } }),
            Self::Failed { kind, message } => json!({ "error": { "kind": kind, "message": message } }),
        }
    }
}

impl From<antenna_core::stratified::OpticsError> for CliError {
    fn from(e: antenna_core::stratified::OpticsError) -> Self {
        use antenna_core::stratified::OpticsError as E;
        match e {
            E::Config(m) => Self::Usage(m),
            other => Self::failed("optics", other),
        }
    }
}

impl From<antenna_core::materials::MaterialError> for CliError {
    fn from(e: antenna_core::materials::MaterialError) -> Self {
        Self::failed("material", e)
    }
}

impl From<antenna_core::models::ModelError> for CliError {
    fn from(e: antenna_core::models::ModelError) -> Self {
        Self::failed("fit", e)
    }
}

impl From<antenna_core::pipeline::PipelineError> for CliError {
    fn from(e: antenna_core::pipeline::PipelineError) -> Self {
        Self::failed("pipeline", e)
    }
}
