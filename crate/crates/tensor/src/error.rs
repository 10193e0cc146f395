use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument in {op}: {message}")]
    InvalidArgument { op: &'static str, message: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn shape_err<T>(op: &'static str, left: &[usize], right: &[usize]) -> Result<T> {
    Err(TensorError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    })
}

pub(crate) fn arg_err<T>(op: &'static str, message: impl Into<String>) -> Result<T> {
    Err(TensorError::InvalidArgument {
        op,
        message: message.into(),
    })
}
