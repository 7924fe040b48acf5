use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
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
    Core(valley_qed::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 1 for configuration and I/O problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !is_config_error(e) => 2,
            _ => 1,
        }
    }
}

fn is_config_error(e: &valley_qed::Error) -> bool {
    use valley_qed::Error::*;
    matches!(e, Config(_) | InvalidSpec(_) | Index(_) | UnsupportedGeometry(_) | NoSolution)
}

impl From<valley_qed::Error> for CliError {
    fn from(e: valley_qed::Error) -> Self {
        CliError::Core(e)
    }
}
