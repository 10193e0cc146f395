use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Whether batch normalization uses batch statistics (and updates its
/// running estimates) or the stored running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BnMode {
    Train,
    Infer,
}

/// Running statistics of one batch-normalization layer over `dim` features.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Scalar> BatchNormState<T> {
    /// Mean 0, variance 1, momentum 0.1, epsilon 1e-5.
    pub fn new(dim: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }

    pub fn dim(&self) -> usize {
        self.running_mean.len()
    }

    /// Folds one batch's statistics into the running estimates. `var` is
    /// the biased batch variance over `count` samples; the running estimate
    /// tracks the unbiased one.
    pub(crate) fn update(&mut self, mean: &[T], var: &[T], count: usize) {
        let m = self.momentum;
        let keep = T::one() - m;
        let unbias = T::lit(count as f64 / (count as f64 - 1.0));
        for c in 0..self.dim() {
            self.running_mean[c] = keep * self.running_mean[c] + m * mean[c];
            self.running_var[c] = keep * self.running_var[c] + m * var[c] * unbias;
        }
    }

    pub fn cast<U: Scalar>(&self) -> BatchNormState<U> {
        BatchNormState {
            running_mean: self.running_mean.iter().map(|v| U::lit(v.as_f64())).collect(),
            running_var: self.running_var.iter().map(|v| U::lit(v.as_f64())).collect(),
            momentum: U::lit(self.momentum.as_f64()),
            eps: U::lit(self.eps.as_f64()),
        }
    }
}
