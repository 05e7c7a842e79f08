use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not extreme: point lies in the convex hull of the other points")]
    NotExtreme,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("oracle budget exhausted after {0} batches")]
    BudgetExhausted(usize),
    #[error("spectral gap: {0}")]
    SpectralGap(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<MfError>,
    },
}

impl MfError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MfError::InvalidInput(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        MfError::Precondition(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        MfError::Numerical(msg.into())
    }

    /// Wraps the error with the pipeline stage that raised it.
    pub fn at_stage(self, stage: &str) -> Self {
        MfError::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, MfError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MfError::DimensionMismatch { expected, got });
    }
    Ok(())
}
