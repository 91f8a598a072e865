use std::path::PathBuf;

use telemetry_anomaly::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path} at `{field}`: {message}")]
    ConfigParse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot parse {path} at `{field}`: {message}")]
    InputParse {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError::Invalid(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigParse { .. } | CliError::Invalid(_) => 1,
            CliError::Core(CoreError::InvalidConfig { .. } | CoreError::ShapeMismatch { .. }) => 1,
            CliError::ConfigRead { .. }
            | CliError::InputParse { .. }
            | CliError::Core(_)
            | CliError::Io { .. } => 2,
        }
    }
}

pub fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}
