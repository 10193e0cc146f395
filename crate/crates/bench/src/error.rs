use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// The experiment cannot start; nothing was run.
    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("{0}")]
    Report(String),

    #[error(transparent)]
    Core(#[from] lop_core::LopError),

    #[error(transparent)]
    Model(#[from] lop_model::ModelError),

    #[error(transparent)]
    Train(#[from] lop_train::TrainError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Spec(_) => crate::EXIT_SPEC_INVALID,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
