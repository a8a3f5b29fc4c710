use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;
use znnrad::alsoa::AlsoaError;
use znnrad::diezin::DieznnError;
use znnrad::ewt_features::FeatureError;
use znnrad::ingest::IngestError;
use znnrad::metrics::MetricsError;
use znnrad::ukf_denoise::UkfError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Format { .. } => "format",
            CliError::Io { .. } => "io",
            CliError::Stage { .. } => "stage",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() }).to_string()
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format { path: path.into(), message: message.into() }
    }

    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Stage { stage, message: err.to_string() }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Config(m) => CliError::Config(m),
            IngestError::Io { path, source } => CliError::Io { path, source },
            other => CliError::stage("ingest", other),
        }
    }
}

impl From<UkfError> for CliError {
    fn from(e: UkfError) -> Self {
        CliError::stage("denoise", e)
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::stage("extract", e)
    }
}

impl From<DieznnError> for CliError {
    fn from(e: DieznnError) -> Self {
        CliError::stage("train", e)
    }
}

impl From<AlsoaError> for CliError {
    fn from(e: AlsoaError) -> Self {
        CliError::stage("tune", e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { path, source } => CliError::Io { path, source },
            other => CliError::stage("evaluate", other),
        }
    }
}
