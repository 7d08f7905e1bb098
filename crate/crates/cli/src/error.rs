use std::path::PathBuf;

use thiserror::Error;

use crate::external::ProtocolError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("config file {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lanczos_composite::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for external
    /// evaluator failures, 4 for evaluator timeouts and 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => 2,
            CliError::Core(lanczos_composite::Error::InvalidArgument(_)) => 2,
            CliError::Core(lanczos_composite::Error::Evaluation { source, .. }) => {
                match source.downcast_ref::<ProtocolError>() {
                    Some(ProtocolError::Timeout { .. }) => 4,
                    Some(_) => 3,
                    None => 1,
                }
            }
            _ => 1,
        }
    }
}
