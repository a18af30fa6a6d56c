use thiserror::Error;

/// Failures that stop a command before a report exists. All map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] harnack::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
