use std::path::{Path, PathBuf};

use airq_core::ForecastError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for bad usage or input, 3 for I/O, 4 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Forecast(ForecastError::Io(_)) => 3,
            CliError::Forecast(e) if e.is_numerical() => 4,
            CliError::Forecast(_) => 2,
        }
    }
}
