use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    InsufficientData(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::InsufficientData(_) => ExitCode::from(3),
            CliError::Validation(_) | CliError::Io { .. } => ExitCode::from(2),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<dmtlab::Error> for CliError {
    fn from(e: dmtlab::Error) -> Self {
        match e {
            dmtlab::Error::InsufficientData(msg) => CliError::InsufficientData(msg),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
