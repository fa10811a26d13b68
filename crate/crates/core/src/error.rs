use thiserror::Error;

/// Errors raised while building models, enumerating them, or evaluating bounds.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    Validation(String),

    #[error("enumeration needs {needed} atoms but the cap is {cap}; use the Monte Carlo estimators instead")]
    CapExceeded { needed: u128, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown gallery model `{0}`")]
    UnknownGallery(String),

    #[error("unknown output format `{0}` (expected json, csv or table)")]
    UnknownFormat(String),

    #[error("inconsistent estimate: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapExceeded { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
