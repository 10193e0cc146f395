use lop_core::io::GeneratorSpec;
use lop_model::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

fn default_lr() -> f64 {
    1e-4
}

fn default_clip() -> f64 {
    1.0
}

fn default_validation() -> usize {
    64
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    /// Training instances; its `n` is the instance size.
    pub generator: GeneratorSpec,
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Global gradient-norm limit.
    #[serde(default = "default_clip")]
    pub max_grad_norm: f64,
    /// Held-out instances for picking the best checkpoint.
    #[serde(default = "default_validation")]
    pub validation_size: usize,
}

impl TrainConfig {
    pub fn new(generator: GeneratorSpec, model: ModelConfig, seed: u64) -> Self {
        Self {
            epochs: 1,
            batches_per_epoch: 1,
            batch_size: 32,
            generator,
            seed,
            model,
            learning_rate: default_lr(),
            max_grad_norm: default_clip(),
            validation_size: default_validation(),
        }
    }

    /// Full-scale schedule: 200 epochs of 100 batches, batch size 128 for
    /// `n <= 30`, 64 for `n <= 40` and 32 above.
    pub fn reference_schedule(n: usize, seed: u64) -> Self {
        let batch_size = match n {
            0..=30 => 128,
            31..=40 => 64,
            _ => 32,
        };
        Self {
            epochs: 200,
            batches_per_epoch: 100,
            batch_size,
            ..Self::new(GeneratorSpec::uniform(n, seed), ModelConfig::default(), seed)
        }
    }

    pub fn n(&self) -> usize {
        self.generator.n
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 || self.batches_per_epoch == 0 || self.batch_size == 0 {
            return fail("epochs, batches per epoch and batch size must be positive");
        }
        if self.validation_size == 0 {
            return fail("validation set must not be empty");
        }
        if self.generator.n < 2 {
            return fail("instance size must be at least 2");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning rate must be positive");
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm > 0.0) {
            return fail("gradient clip must be positive");
        }
        self.model.validate()?;
        Ok(())
    }

    /// Equal except for the epoch count, so a run may be extended.
    pub(crate) fn resumable_from(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.epochs = other.epochs;
        &a == other
    }
}
