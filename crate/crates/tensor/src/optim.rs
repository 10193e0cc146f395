use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::param::ParamStore;
use crate::scalar::Scalar;

/// Adam with bias correction. Each parameter keeps its own moments and step
/// counter, so they survive a checkpoint round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return arg_err("Adam::new", format!("learning rate must be positive, got {lr}"));
        }
        Ok(Self { lr, ..Self::default() })
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) {
        for p in store.iter_mut() {
            p.step += 1;
            let t = p.step as f64;
            let c1 = 1.0 - self.beta1.powf(t);
            let c2 = 1.0 - self.beta2.powf(t);
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let g = p.grad[i].as_f64();
                let m = self.beta1 * p.first_moment[i].as_f64() + (1.0 - self.beta1) * g;
                let v = self.beta2 * p.second_moment[i].as_f64() + (1.0 - self.beta2) * g * g;
                p.first_moment[i] = T::lit(m);
                p.second_moment[i] = T::lit(v);
                let update = self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
                values[i] = T::lit(values[i].as_f64() - update);
                p.grad[i] = T::zero();
            }
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(store: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let scale = T::lit(max_norm / norm);
        for p in store.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}
