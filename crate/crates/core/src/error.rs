use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("degenerate selection: {0}")]
    DegenerateSelection(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index undefined: {0}")]
    UndefinedIndex(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
