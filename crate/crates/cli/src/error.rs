use glmdesign::DesignError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input; the message names the offending field.
    #[error("input error: {0}")]
    Input(String),
    #[error("solver error: {0}")]
    Solver(#[from] DesignError),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Solver(_) => 3,
            Self::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
