use thiserror::Error;

/// Failure modes surfaced by the library. The CLI maps these onto exit
/// codes: config errors exit 2, i/o errors exit 3, everything else that
/// reaches the top level is a suite failure (exit 1).
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("numerics: {0}")]
    Numerics(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn numerics(msg: impl Into<String>) -> Self {
        LabError::Numerics(msg.into())
    }
}
