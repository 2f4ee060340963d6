use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ranked list: {0}")]
    InvalidList(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feedback does not match the last recommendation")]
    FeedbackMismatch,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("mismatched horizons across traces: {0}")]
    HorizonMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
