use thiserror::Error;

/// Failures surfaced to the command line, each mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
        }
    }
}

impl From<polyirls_core::Error> for CliError {
    fn from(e: polyirls_core::Error) -> Self {
        match e {
            polyirls_core::Error::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("malformed CSV: {e}"))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
