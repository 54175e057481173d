use thiserror::Error;

/// Errors raised anywhere in the library. The CLI maps variants to exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdrcError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ambient variable mismatch")]
    AmbientMismatch,
    #[error("divisor is not monic in variable {0}")]
    NotMonic(String),
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("computation failed in stage {stage}: {message}")]
    Computation { stage: String, message: String },
}

impl EdrcError {
    pub fn precondition(msg: impl Into<String>) -> Self {
        EdrcError::Precondition(msg.into())
    }

    pub fn computation(stage: &str, msg: impl Into<String>) -> Self {
        EdrcError::Computation {
            stage: stage.to_string(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EdrcError>;
