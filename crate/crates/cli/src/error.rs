use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse config: {0}")]
    ConfigParse(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigParse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<qcollide::Error> for CliError {
    fn from(err: qcollide::Error) -> Self {
        match err {
            qcollide::Error::NonFinite(_) => CliError::Numeric(err.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(err))
    }
}
