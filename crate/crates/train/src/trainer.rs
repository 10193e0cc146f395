use std::fs::{self, OpenOptions};
use std::path::Path;
use std::time::Instant;

use lop_core::io::generate;
use lop_core::{derive_path, derive_seed, LopInstance, Rng};
use lop_model::{Decode, Model};
use lop_tensor::{clip_grad_norm, Adam, BnMode, Checkpoint, Graph};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Result, TrainError};
use crate::loss::reinforce_loss;

pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LOG_FILE: &str = "train_log.csv";

const TRAIN_STREAM: u64 = 1;
const VALID_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub loss: f64,
    pub wall_time_s: f64,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Continue from `last.ckpt` in the output directory when present.
    pub resume: bool,
    /// Called after every epoch with the log row and the validation reward.
    pub progress: Option<&'a mut dyn FnMut(&LogRow, f64)>,
}

pub struct TrainOutcome {
    /// Rows written by this call.
    pub log: Vec<LogRow>,
    /// Model after the last epoch.
    pub model: Model,
    pub best_validation_reward: f64,
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct TrainMeta {
    config: TrainConfig,
    epochs_done: usize,
    best_validation_reward: f64,
    best_epoch: usize,
    sampling_rng: Rng,
}

fn batch_instances(cfg: &TrainConfig, sources: &[LopInstance], epoch: usize, batch: usize) -> Result<(u64, Vec<LopInstance>)> {
    let mut spec = cfg.generator.clone();
    spec.seed = derive_path(cfg.seed, &[TRAIN_STREAM, epoch as u64, batch as u64]);
    let insts = (0..cfg.batch_size as u64)
        .map(|i| generate(&spec, sources, i))
        .collect::<lop_core::Result<Vec<_>>>()?;
    Ok((spec.seed, insts))
}

/// Held-out validation instances of a configuration.
pub(crate) fn validation_set(cfg: &TrainConfig, sources: &[LopInstance]) -> Result<Vec<LopInstance>> {
    let mut spec = cfg.generator.clone();
    spec.seed = derive_seed(cfg.seed, VALID_STREAM);
    Ok((0..cfg.validation_size as u64)
        .map(|i| generate(&spec, sources, i))
        .collect::<lop_core::Result<Vec<_>>>()?)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn save(model: &Model, meta: &TrainMeta, path: &Path) -> Result<()> {
    let mut ck = model.to_checkpoint(true)?;
    ck.meta["train"] = serde_json::to_value(meta).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    ck.save(path)?;
    Ok(())
}

fn load_meta(ck: &Checkpoint) -> Result<TrainMeta> {
    serde_json::from_value(ck.meta["train"].clone())
        .map_err(|e| TrainError::Checkpoint(format!("no training state in checkpoint: {e}")))
}

/// Reads a training log written by [`train`].
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<std::result::Result<Vec<LogRow>, _>>()?)
}

/// Trains a model from scratch (or resumes one) and writes
/// `last.ckpt`, `best.ckpt` and `train_log.csv` into `out_dir`.
///
/// Every batch draws fresh instances from the generator; each instance gets
/// one sampled rollout (batch-norm in train mode, on the tape) and one
/// greedy rollout (inference mode, off the tape) whose reward is the
/// baseline. After
/// each epoch the greedy mean reward on the validation set decides whether
/// `best.ckpt` is replaced.
pub fn train(cfg: &TrainConfig, out_dir: &Path, sources: &[LopInstance], mut opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.generator.validate(sources)?;
    fs::create_dir_all(out_dir)?;
    let last_path = out_dir.join(LAST_CHECKPOINT);
    let best_path = out_dir.join(BEST_CHECKPOINT);
    let log_path = out_dir.join(LOG_FILE);

    let (mut model, mut meta) = if opts.resume && last_path.exists() {
        let ck = Checkpoint::load(&last_path)?;
        let meta = load_meta(&ck)?;
        if !cfg.resumable_from(&meta.config) {
            return Err(TrainError::Config(
                "checkpoint was written by a different configuration".into(),
            ));
        }
        let mut model = Model::new(cfg.model, 0)?;
        model.load_checkpoint(&ck)?;
        (model, meta)
    } else {
        let model = Model::new(cfg.model, derive_seed(cfg.seed, INIT_STREAM))?;
        let meta = TrainMeta {
            config: cfg.clone(),
            epochs_done: 0,
            best_validation_reward: f64::NEG_INFINITY,
            best_epoch: 0,
            sampling_rng: Rng::new(derive_seed(cfg.seed, SAMPLE_STREAM)),
        };
        (model, meta)
    };
    meta.config = cfg.clone();

    let fresh_log = meta.epochs_done == 0 || !log_path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh_log)
        .truncate(fresh_log)
        .open(&log_path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(fresh_log).from_writer(file);

    let adam = Adam::new(cfg.learning_rate)?;
    let valid = validation_set(cfg, sources)?;
    let started = Instant::now();
    let mut rows = Vec::new();

    for epoch in meta.epochs_done..cfg.epochs {
        let (mut rewards, mut advantages, mut losses) = (Vec::new(), Vec::new(), Vec::new());
        for batch in 0..cfg.batches_per_epoch {
            let (seed, insts) = batch_instances(cfg, sources, epoch, batch)?;
            let refs: Vec<&LopInstance> = insts.iter().collect();
            let baselines = model.rollout_batch(&refs, Decode::Greedy, false)?.rewards();
            let mut rngs: Vec<Rng> = (0..insts.len()).map(|_| Rng::new(meta.sampling_rng.next_u64())).collect();
            let mut g = Graph::new();
            let out = model.rollout_batch_on(&mut g, &refs, Decode::Sample(&mut rngs), BnMode::Train)?;
            let sampled = out.rewards();
            let logp = out.log_prob.expect("tape kept");
            let loss = reinforce_loss(&mut g, logp, &sampled, &baselines)?;
            let loss_value = g.value(loss).item() as f64;
            if !loss_value.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch, seed });
            }
            g.backward_into(loss, model.params_mut())?;
            drop(g);
            clip_grad_norm(model.params_mut(), cfg.max_grad_norm);
            adam.step(model.params_mut());

            rewards.extend_from_slice(&sampled);
            advantages.extend(sampled.iter().zip(&baselines).map(|(r, b)| r - b));
            losses.push(loss_value);
        }
        let valid_reward = mean(&model.greedy_many(&valid, 64)?.iter().map(|t| t.reward).collect::<Vec<_>>());
        let row = LogRow {
            epoch: epoch + 1,
            mean_reward: mean(&rewards),
            mean_advantage: mean(&advantages),
            loss: mean(&losses),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        writer.serialize(&row)?;
        writer.flush()?;
        meta.epochs_done = epoch + 1;
        if valid_reward > meta.best_validation_reward {
            meta.best_validation_reward = valid_reward;
            meta.best_epoch = epoch + 1;
            save(&model, &meta, &best_path)?;
        }
        save(&model, &meta, &last_path)?;
        if let Some(cb) = opts.progress.as_mut() {
            cb(&row, valid_reward);
        }
        rows.push(row);
    }

    Ok(TrainOutcome {
        log: rows,
        model,
        best_validation_reward: meta.best_validation_reward,
        best_epoch: meta.best_epoch,
    })
}
