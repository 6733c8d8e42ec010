use fk_core::FkError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("runtime failure: {0}")]
    Runtime(#[from] FkError),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("audit failure: {0}")]
    Audit(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(FkError::AuditFailure { .. }) | CliError::Audit(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}
