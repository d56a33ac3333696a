use std::path::PathBuf;

use clockclosure_core::{DynamicsError, InterrogationError, SpectraError, StatsError};
use thiserror::Error;

/// Process exit status for each error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SIMULATION: i32 = 3;
    pub const DATA: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config `{path}`: {field}: {message}")]
    Config { path: String, field: String, message: String },
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{context}: {source}")]
    Simulation {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => exit::CONFIG,
            CliError::Simulation { .. } | CliError::Output { .. } => exit::SIMULATION,
            CliError::Data { .. } => exit::DATA,
        }
    }

    pub fn config(path: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), field: field.into(), message: message.into() }
    }

    pub fn data(context: impl Into<String>, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        CliError::Data { context: context.into(), source: source.into() }
    }

    pub fn simulation(context: impl Into<String>, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        CliError::Simulation { context: context.into(), source: source.into() }
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        CliError::data("level table", e)
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::simulation("dynamics", e)
    }
}

impl From<InterrogationError> for CliError {
    fn from(e: InterrogationError) -> Self {
        CliError::simulation("interrogation", e)
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::simulation("statistics", e)
    }
}
