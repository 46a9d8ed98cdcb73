use smcprice_core::SmcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] SmcError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for bad configuration, 3 for a degenerate particle cloud, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(SmcError::InvalidConfig(_)) => 2,
            CliError::Engine(SmcError::DegenerateCloud { .. }) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}
