//! Constructive neural policy for the linear ordering problem.
//!
//! Instances are presented as complete directed graphs: the edge feature of
//! `(i, j)` is `b[i][j] - b[j][i]` scaled into `[-1, 1]`, and node features
//! encode the partial solution built so far. A residual message-passing
//! encoder with edge gates produces node embeddings; an attention decoder
//! turns the graph embedding and the mean embedding of placed items into a
//! distribution over the items that are still unplaced.
//!
//! No parameter shape depends on the instance size, so one model serves
//! every `n >= 2`.

mod checkpoint;
mod config;
mod error;
mod model;
mod rollout;
mod state;

pub use config::{ModelConfig, NormStats};
pub use error::{ModelError, Result};
pub use model::{graph_readout, Model};
pub use rollout::{BatchRollout, Decode, RolloutMode, RolloutTrace};
pub use state::{featurize, DecoderState, NodeStateFeatures};
