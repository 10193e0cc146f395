use lop_core::LopInstance;
use lop_model::{Model, RolloutMode};
use lop_tensor::{Graph, Scalar, Var};

use crate::error::{Result, TrainError};

/// `mean_b -(R_b - baseline_b) * log_prob_b`. The advantages enter as
/// constants, so gradients flow only through `log_prob` (`[B]`).
pub fn reinforce_loss<T: Scalar>(g: &mut Graph<T>, log_prob: Var, rewards: &[f64], baselines: &[f64]) -> Result<Var> {
    if rewards.is_empty() {
        return Err(TrainError::InvalidArgument("empty batch".into()));
    }
    if rewards.len() != baselines.len() || g.value(log_prob).numel() != rewards.len() {
        return Err(TrainError::InvalidArgument(format!(
            "{} rewards, {} baselines, {} log-probabilities",
            rewards.len(),
            baselines.len(),
            g.value(log_prob).numel()
        )));
    }
    let inv = 1.0 / rewards.len() as f64;
    let w: Vec<T> = rewards
        .iter()
        .zip(baselines)
        .map(|(r, b)| T::lit(-(r - b) * inv))
        .collect();
    Ok(g.weighted_sum(log_prob, &w)?)
}

/// Reward of the model's own greedy rollout.
pub fn scst_baseline<T: Scalar>(model: &Model<T>, inst: &LopInstance) -> Result<f64> {
    Ok(model.rollout(inst, RolloutMode::Greedy, 0)?.reward)
}
