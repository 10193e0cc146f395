use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error("invalid decoder state: {0}")]
    State(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Tensor(#[from] lop_tensor::TensorError),

    #[error(transparent)]
    Core(#[from] lop_core::LopError),
}

pub type Result<T> = std::result::Result<T, ModelError>;
