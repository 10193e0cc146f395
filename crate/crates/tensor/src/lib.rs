//! Dense tensors with define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its nodes; calling
//! [`Graph::backward`] on a scalar node walks that tape in reverse. The tape
//! is rebuilt on every forward pass, so control flow (such as autoregressive
//! decoding) can differ between passes.
//!
//! Besides the usual element-wise and linear-algebra primitives the graph
//! provides a handful of fused operations used by message-passing encoders
//! and attention decoders over batched graphs (`[batch, nodes, nodes, dim]`
//! edge tensors). All reductions run in a fixed index order, so results are
//! bit-reproducible for identical inputs on one machine.

mod backward;
mod batchnorm;
mod checkpoint;
mod error;
mod gradcheck;
mod graph;
mod optim;
mod param;
mod scalar;
mod tensor;

pub use backward::Gradients;
pub use batchnorm::{BatchNormState, BnMode};
pub use checkpoint::{Checkpoint, CheckpointTensor, CHECKPOINT_VERSION};
pub use error::{Result, TensorError};
pub use gradcheck::{gradient_check, gradient_check_params, GradCheckReport, REL_ERROR_FLOOR};
pub use graph::{Graph, Var};
pub use optim::{clip_grad_norm, Adam};
pub use param::{ParamId, ParamStore, Parameter};
pub use scalar::Scalar;
pub use tensor::Tensor;
