use std::path::Path;

use lop_core::{derive_seed, LopInstance, Permutation, Rng};
use lop_model::{Decode, Model, ModelConfig};
use lop_tensor::{clip_grad_norm, Adam, BnMode, Graph};

use crate::error::{Result, TrainError};
use crate::loss::reinforce_loss;

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSearchConfig {
    pub epochs: usize,
    /// Rollouts per update; targets are repeated cyclically to fill it.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for ActiveSearchConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-4,
            max_grad_norm: 1.0,
            seed: 0,
        }
    }
}

pub struct ActiveSearchResult {
    /// Best solution and value per target.
    pub best: Vec<(Permutation, f64)>,
    /// Greedy value of the starting model per target.
    pub initial_greedy: Vec<f64>,
    /// Best-so-far values per target after each epoch.
    pub history: Vec<Vec<f64>>,
    /// Complete rollouts decoded per target, the initial greedy one
    /// included.
    pub rollouts: Vec<u64>,
    /// The fine-tuned model.
    pub model: Model,
}

fn offer(best: &mut (Permutation, f64), sol: &Permutation, value: f64) {
    if value > best.1 {
        *best = (sol.clone(), value);
    }
}

/// Continues policy-gradient training on `targets` only, keeping the best
/// solution seen for each target across sampled and greedy rollouts.
///
/// Each epoch makes one update per instance size: a batch of
/// `batch_size` sampled rollouts cycling over the targets of that size, with
/// the greedy rollout of each target as its baseline.
pub fn active_search(mut model: Model, targets: &[LopInstance], cfg: &ActiveSearchConfig) -> Result<ActiveSearchResult> {
    if targets.is_empty() {
        return Err(TrainError::InvalidArgument("no target instances".into()));
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::InvalidArgument("batch size must be positive".into()));
    }
    let adam = Adam::new(cfg.learning_rate)?;
    let greedy = model.greedy_many(targets, 64)?;
    let initial_greedy: Vec<f64> = greedy.iter().map(|t| t.reward).collect();
    let mut best: Vec<(Permutation, f64)> = greedy.into_iter().map(|t| (t.solution, t.reward)).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut sampling = Rng::new(derive_seed(cfg.seed, 7));
    let mut rollouts = vec![1u64; targets.len()];

    let mut sizes: Vec<usize> = targets.iter().map(|t| t.n()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let groups: Vec<Vec<usize>> = sizes
        .iter()
        .map(|&n| (0..targets.len()).filter(|&k| targets[k].n() == n).collect())
        .collect();

    for epoch in 0..cfg.epochs {
        for group in &groups {
            let start = epoch * cfg.batch_size;
            let members: Vec<usize> = (0..cfg.batch_size).map(|i| group[(start + i) % group.len()]).collect();
            let refs: Vec<&LopInstance> = members.iter().map(|&k| &targets[k]).collect();
            let mut distinct = members.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let distinct_refs: Vec<&LopInstance> = distinct.iter().map(|&k| &targets[k]).collect();
            let greedy = model.rollout_batch(&distinct_refs, Decode::Greedy, false)?;
            let mut baseline_of = vec![0.0; targets.len()];
            for (&k, tr) in distinct.iter().zip(&greedy.traces) {
                baseline_of[k] = tr.reward;
                rollouts[k] += 1;
                offer(&mut best[k], &tr.solution, tr.reward);
            }
            let baselines: Vec<f64> = members.iter().map(|&k| baseline_of[k]).collect();
            let mut rngs: Vec<Rng> = members.iter().map(|_| Rng::new(sampling.next_u64())).collect();
            let mut g = Graph::new();
            let out = model.rollout_batch_on(&mut g, &refs, Decode::Sample(&mut rngs), BnMode::Train)?;
            for (&k, tr) in members.iter().zip(&out.traces) {
                rollouts[k] += 1;
                offer(&mut best[k], &tr.solution, tr.reward);
            }
            let loss = reinforce_loss(&mut g, out.log_prob.expect("tape kept"), &out.rewards(), &baselines)?;
            g.backward_into(loss, model.params_mut())?;
            drop(g);
            clip_grad_norm(model.params_mut(), cfg.max_grad_norm);
            adam.step(model.params_mut());
        }
        history.push(best.iter().map(|b| b.1).collect());
    }
    Ok(ActiveSearchResult {
        best,
        initial_greedy,
        history,
        rollouts,
        model,
    })
}

/// [`active_search`] starting from a saved model, which must match
/// `expected` in architecture when given.
pub fn active_search_from_checkpoint(
    path: &Path,
    expected: Option<&ModelConfig>,
    targets: &[LopInstance],
    cfg: &ActiveSearchConfig,
) -> Result<ActiveSearchResult> {
    let model = Model::load(path)?;
    if let Some(exp) = expected {
        if !exp.same_architecture(model.config()) {
            let got = model.config();
            return Err(TrainError::Model(lop_model::ModelError::Incompatible(format!(
                "checkpoint has d={}, L={}, M={}; expected d={}, L={}, M={}",
                got.d, got.layers, got.heads, exp.d, exp.layers, exp.heads
            ))));
        }
    }
    active_search(model, targets, cfg)
}
