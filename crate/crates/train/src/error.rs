use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch} (instance seed {seed})")]
    NonFinite { epoch: usize, batch: usize, seed: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Model(#[from] lop_model::ModelError),

    #[error(transparent)]
    Tensor(#[from] lop_tensor::TensorError),

    #[error(transparent)]
    Core(#[from] lop_core::LopError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
