use std::path::{Path, PathBuf};

use saem_core::SaemError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}: {message}", path.display())]
    ConfigParse { path: PathBuf, line: usize, message: String },
    #[error("config key `{key}`: {message}")]
    ConfigKey { key: String, message: String },
    #[error("{}: line {line}: {message}", path.display())]
    DataFormat { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replication {replication}: {source}")]
    Run { replication: usize, source: SaemError },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn key(key: &str, message: impl Into<String>) -> Self {
        CliError::ConfigKey { key: key.to_string(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 for configuration, data and IO problems, 2 for failed runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run { .. } | CliError::Failed(_) => 2,
            _ => 1,
        }
    }
}
