use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Where the encoder's normalization layers take their statistics from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormStats {
    /// Statistics of each instance's own node (edge) embeddings, in
    /// training and evaluation alike.
    Instance,
    /// Classic batch normalization: batch statistics while training,
    /// running estimates in evaluation.
    Batch,
}

fn default_norm() -> NormStats {
    NormStats::Instance
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding width.
    pub d: usize,
    /// Encoder layers.
    pub layers: usize,
    /// Attention heads in the decoder; must divide `d`.
    pub heads: usize,
    /// Logits are `clip * tanh(..)`.
    pub clip: f64,
    /// Re-run featurization and the encoder before every decoding step.
    /// When false the encoder runs once on the empty solution and only the
    /// decoder context tracks the partial solution.
    pub reencode_each_step: bool,
    #[serde(default = "default_norm")]
    pub norm: NormStats,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 128,
            layers: 3,
            heads: 8,
            clip: 10.0,
            reencode_each_step: true,
            norm: NormStats::Instance,
        }
    }
}

impl ModelConfig {
    /// Small profile for CPU training: `d = 32`, two layers, four heads.
    pub fn desk() -> Self {
        Self {
            d: 32,
            layers: 2,
            heads: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ModelError::Config(m));
        if self.d == 0 {
            return fail("d must be positive".into());
        }
        if self.layers == 0 {
            return fail("at least one encoder layer is required".into());
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return fail(format!("{} heads do not divide d = {}", self.heads, self.d));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return fail(format!("logit clip must be positive, got {}", self.clip));
        }
        Ok(())
    }

    /// True when two configurations describe the same parameter shapes.
    pub fn same_architecture(&self, other: &Self) -> bool {
        self.d == other.d && self.layers == other.layers && self.heads == other.heads
    }
}
