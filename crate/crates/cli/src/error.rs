use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("acceptance failed: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl From<scatter_core::Error> for CliError {
    fn from(e: scatter_core::Error) -> Self {
        use scatter_core::Error as E;
        match e {
            E::InvalidSize(_) | E::Domain(_) | E::InvalidMatrix(_) | E::Reducible(_) | E::NotApplicable(_) => {
                CliError::Validation(e.to_string())
            }
            E::Divergent(_) | E::Solver(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
