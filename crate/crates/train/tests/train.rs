use lop_core::io::{gen_uniform, GeneratorSpec};
use lop_core::{evaluate, LopInstance};
use lop_model::{Decode, Model, ModelConfig, RolloutMode};
use lop_tensor::{Adam, BnMode, Graph, Tensor};
use lop_train::{
    active_search, active_search_from_checkpoint, read_log, reinforce_loss, scst_baseline, train, ActiveSearchConfig,
    LogRow, TrainConfig, TrainError, TrainOptions, BEST_CHECKPOINT, LAST_CHECKPOINT, LOG_FILE,
};

fn tiny_model() -> ModelConfig {
    ModelConfig {
        d: 8,
        layers: 2,
        heads: 2,
        ..ModelConfig::default()
    }
}

fn tiny_run(n: usize, epochs: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(GeneratorSpec::uniform(n, seed), tiny_model(), seed);
    cfg.epochs = epochs;
    cfg.batches_per_epoch = 3;
    cfg.batch_size = 8;
    cfg.validation_size = 8;
    cfg
}

fn without_time(rows: &[LogRow]) -> Vec<(usize, f64, f64, f64)> {
    rows.iter().map(|r| (r.epoch, r.mean_reward, r.mean_advantage, r.loss)).collect()
}

fn loss_of(logp: &[f64], rewards: &[f64], baselines: &[f64]) -> (f64, Vec<f64>) {
    let mut g = Graph::<f64>::new();
    let lp = g.tracked(Tensor::new(&[logp.len()], logp.to_vec()).unwrap());
    let loss = reinforce_loss(&mut g, lp, rewards, baselines).unwrap();
    let grads = g.backward(loss).unwrap();
    (g.value(loss).item(), grads.get(lp).unwrap().to_vec())
}

#[test]
fn reinforce_loss_examples() {
    let (loss, grad) = loss_of(&[-1.0, -3.0, -0.5], &[4.0, 2.0, 7.0], &[4.0, 2.0, 7.0]);
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&v| v == 0.0));

    let (loss, grad) = loss_of(&[-2.0], &[6.0], &[5.0]);
    assert!((loss - 2.0).abs() < 1e-12);
    assert!((grad[0] + 1.0).abs() < 1e-12);

    let (loss, _) = loss_of(&[-2.0, -4.0], &[3.0, 1.0], &[1.0, 2.0]);
    assert!((loss - 0.5 * (2.0 * 2.0 - 4.0)).abs() < 1e-12);
}

#[test]
fn reinforce_loss_rejects_bad_batches() {
    let mut g = Graph::<f64>::new();
    let lp = g.tracked(Tensor::new(&[2], vec![-1.0, -2.0]).unwrap());
    assert!(matches!(reinforce_loss(&mut g, lp, &[1.0], &[1.0]), Err(TrainError::InvalidArgument(_))));
    assert!(matches!(reinforce_loss(&mut g, lp, &[1.0, 2.0], &[1.0]), Err(TrainError::InvalidArgument(_))));
    let empty = g.tracked(Tensor::new(&[0], vec![]).unwrap());
    assert!(matches!(reinforce_loss(&mut g, empty, &[], &[]), Err(TrainError::InvalidArgument(_))));
}

#[test]
fn advantage_carries_no_gradient() {
    let insts: Vec<LopInstance> = (0..3).map(|s| gen_uniform(6, 40 + s).unwrap()).collect();
    let refs: Vec<&LopInstance> = insts.iter().collect();
    let base = Model::<f64>::new(tiny_model(), 3).unwrap();
    let actions: Vec<Vec<usize>> = vec![vec![0, 1, 2, 3, 4, 5], vec![5, 4, 3, 2, 1, 0], vec![2, 0, 4, 1, 5, 3]];

    let grads_for = |rewards: &[f64], baselines: &[f64]| {
        let mut model = base.clone();
        let mut g = Graph::new();
        let out = model
            .rollout_batch_on(&mut g, &refs, Decode::Forced(&actions), BnMode::Train)
            .unwrap();
        let loss = reinforce_loss(&mut g, out.log_prob.unwrap(), rewards, baselines).unwrap();
        g.backward_into(loss, model.params_mut()).unwrap();
        model.params().iter().flat_map(|p| p.grad.clone()).collect::<Vec<f64>>()
    };

    let a = grads_for(&[3.0, 1.0, 2.0], &[1.0, 2.0, 2.0]);
    let shifted = grads_for(&[103.0, 51.0, -8.0], &[101.0, 52.0, -8.0]);
    assert!(a.iter().any(|&v| v != 0.0));
    for (x, y) in a.iter().zip(&shifted) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
    }

    // Same gradient as -(1/B) sum_b adv_b * d log p_b written out directly.
    let mut model = base.clone();
    let mut g = Graph::new();
    let out = model
        .rollout_batch_on(&mut g, &refs, Decode::Forced(&actions), BnMode::Train)
        .unwrap();
    let direct = g.weighted_sum(out.log_prob.unwrap(), &[-2.0 / 3.0, 1.0 / 3.0, 0.0]).unwrap();
    g.backward_into(direct, model.params_mut()).unwrap();
    let b: Vec<f64> = model.params().iter().flat_map(|p| p.grad.clone()).collect();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
    }
}

#[test]
fn positive_advantage_raises_log_probability() {
    let inst = gen_uniform(7, 5).unwrap();
    let mut model = Model::<f32>::new(tiny_model(), 11).unwrap();
    let sampled = model.rollout(&inst, RolloutMode::Sample, 99).unwrap();
    let before = model.score(&inst, &sampled.solution).unwrap().total_log_prob;
    assert!((before - sampled.total_log_prob).abs() < 1e-5);

    let actions = vec![sampled.solution.as_slice().to_vec()];
    let mut g = Graph::new();
    let out = model
        .rollout_batch_on(&mut g, &[&inst], Decode::Forced(&actions), BnMode::Train)
        .unwrap();
    let loss = reinforce_loss(&mut g, out.log_prob.unwrap(), &[sampled.reward], &[sampled.reward - 1.0]).unwrap();
    g.backward_into(loss, model.params_mut()).unwrap();
    drop(g);
    Adam::new(1e-3).unwrap().step(model.params_mut());

    let after = model.score(&inst, &sampled.solution).unwrap().total_log_prob;
    assert!(after > before, "{before} -> {after}");
}

#[test]
fn scst_baseline_is_the_greedy_reward() {
    let inst = gen_uniform(9, 8).unwrap();
    let model = Model::<f32>::new(tiny_model(), 2).unwrap();
    let greedy = model.rollout(&inst, RolloutMode::Greedy, 0).unwrap();
    let b = scst_baseline(&model, &inst).unwrap();
    assert_eq!(b, evaluate(&inst, &greedy.solution).unwrap());
    assert_eq!(b, scst_baseline(&model, &inst).unwrap());

    // A sample that happens to reproduce the greedy trace has zero advantage.
    let found = (0..500)
        .map(|s| model.rollout(&inst, RolloutMode::Sample, s).unwrap())
        .find(|t| t.solution == greedy.solution);
    if let Some(t) = found {
        assert_eq!(t.reward - b, 0.0);
    }
}

#[test]
fn rollout_traces_are_consistent() {
    let inst = gen_uniform(10, 1).unwrap();
    let model = Model::<f32>::new(tiny_model(), 4).unwrap();
    for s in 0..20 {
        let t = model.rollout(&inst, RolloutMode::Sample, s).unwrap();
        assert_eq!(t.step_log_probs.len(), 10);
        assert!((t.total_log_prob - t.step_log_probs.iter().sum::<f64>()).abs() < 1e-6);
        assert_eq!(t.reward, evaluate(&inst, &t.solution).unwrap());
    }
}

#[test]
fn config_validation() {
    for n in [20, 30, 40, 50] {
        let cfg = TrainConfig::reference_schedule(n, 1);
        cfg.validate().unwrap();
        assert_eq!((cfg.epochs, cfg.batches_per_epoch), (200, 100));
        assert_eq!(cfg.n(), n);
    }
    let sizes: Vec<usize> = [20, 30, 40, 50]
        .iter()
        .map(|&n| TrainConfig::reference_schedule(n, 1).batch_size)
        .collect();
    assert_eq!(sizes, [128, 128, 64, 32]);

    let good = tiny_run(6, 1, 1);
    for bad in [
        TrainConfig { epochs: 0, ..good.clone() },
        TrainConfig { batches_per_epoch: 0, ..good.clone() },
        TrainConfig { batch_size: 0, ..good.clone() },
        TrainConfig { validation_size: 0, ..good.clone() },
        TrainConfig { learning_rate: 0.0, ..good.clone() },
        TrainConfig { max_grad_norm: f64::NAN, ..good.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
    }
    let mut bad = good.clone();
    bad.model.heads = 3;
    assert!(bad.validate().is_err());
}

#[test]
fn smoke_training_improves_reward() {
    let model = ModelConfig {
        d: 16,
        layers: 2,
        heads: 4,
        ..ModelConfig::default()
    };
    let mut cfg = TrainConfig::new(GeneratorSpec::uniform(8, 3), model, 3);
    cfg.epochs = 20;
    cfg.batches_per_epoch = 10;
    cfg.batch_size = 32;
    cfg.validation_size = 16;
    let dir = tempfile::tempdir().unwrap();
    let out = train(&cfg, dir.path(), &[], TrainOptions::default()).unwrap();
    assert_eq!(out.log.len(), 20);
    let first: f64 = out.log[..5].iter().map(|r| r.mean_reward).sum::<f64>() / 5.0;
    let last: f64 = out.log[15..].iter().map(|r| r.mean_reward).sum::<f64>() / 5.0;
    assert!(last > first, "first {first} last {last}");

    for f in [LAST_CHECKPOINT, BEST_CHECKPOINT, LOG_FILE] {
        assert!(dir.path().join(f).exists());
    }
    assert_eq!(read_log(dir.path().join(LOG_FILE)).unwrap(), out.log);
    assert!(out.best_epoch >= 1 && out.best_epoch <= 20);
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny_run(6, 2, 17);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = train(&cfg, a.path(), &[], TrainOptions::default()).unwrap();
    let rb = train(&cfg, b.path(), &[], TrainOptions::default()).unwrap();
    assert_eq!(without_time(&ra.log), without_time(&rb.log));
    assert_eq!(ra.model.params(), rb.model.params());

    let other = train(&tiny_run(6, 2, 18), b.path(), &[], TrainOptions::default()).unwrap();
    assert_ne!(without_time(&ra.log), without_time(&other.log));
}

#[test]
fn resumed_training_matches_unbroken_run() {
    let full = tiny_run(6, 4, 5);
    let a = tempfile::tempdir().unwrap();
    let unbroken = train(&full, a.path(), &[], TrainOptions::default()).unwrap();

    let b = tempfile::tempdir().unwrap();
    let half = TrainConfig { epochs: 2, ..full.clone() };
    train(&half, b.path(), &[], TrainOptions::default()).unwrap();
    let rest = train(&full, b.path(), &[], TrainOptions { resume: true, progress: None }).unwrap();
    assert_eq!(rest.log.len(), 2);
    assert_eq!(rest.model.params(), unbroken.model.params());
    assert_eq!(rest.best_validation_reward, unbroken.best_validation_reward);
    assert_eq!(
        without_time(&read_log(b.path().join(LOG_FILE)).unwrap()),
        without_time(&unbroken.log)
    );

    let changed = TrainConfig { learning_rate: 1e-3, ..full.clone() };
    assert!(matches!(
        train(&changed, b.path(), &[], TrainOptions { resume: true, progress: None }),
        Err(TrainError::Config(_))
    ));
}

#[test]
fn progress_callback_sees_every_epoch() {
    let cfg = tiny_run(5, 3, 2);
    let dir = tempfile::tempdir().unwrap();
    let mut seen = Vec::new();
    let mut cb = |row: &LogRow, valid: f64| seen.push((row.epoch, valid));
    let out = train(&cfg, dir.path(), &[], TrainOptions { resume: false, progress: Some(&mut cb) }).unwrap();
    assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), [1, 2, 3]);
    let best = seen.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_validation_reward, best);
}

fn targets() -> Vec<LopInstance> {
    (0..3).map(|s| gen_uniform(7, 300 + s).unwrap()).chain([gen_uniform(5, 9).unwrap()]).collect()
}

#[test]
fn active_search_without_epochs_is_greedy() {
    let model = Model::<f32>::new(tiny_model(), 6).unwrap();
    let ts = targets();
    let greedy = model.greedy_many(&ts, 8).unwrap();
    let cfg = ActiveSearchConfig { epochs: 0, ..ActiveSearchConfig::default() };
    let res = active_search(model.clone(), &ts, &cfg).unwrap();
    assert!(res.history.is_empty());
    assert_eq!(res.model.params(), model.params());
    for ((sol, v), g) in res.best.iter().zip(&greedy) {
        assert_eq!(sol, &g.solution);
        assert_eq!(*v, g.reward);
    }
}

#[test]
fn active_search_best_values_never_decrease() {
    let model = Model::<f32>::new(tiny_model(), 6).unwrap();
    let ts = targets();
    let cfg = ActiveSearchConfig {
        epochs: 5,
        batch_size: 5,
        learning_rate: 1e-3,
        ..ActiveSearchConfig::default()
    };
    let res = active_search(model, &ts, &cfg).unwrap();
    assert_eq!(res.history.len(), 5);
    // Per epoch: 3 + 5 decodes for the n=7 group and 1 + 5 for the single n=5 target.
    assert_eq!(res.rollouts.iter().sum::<u64>(), 4 + 5 * (8 + 6));
    assert_eq!(res.rollouts[3], 1 + 5 * 6);
    let mut prev = res.initial_greedy.clone();
    for row in &res.history {
        for (a, b) in prev.iter().zip(row) {
            assert!(b >= a);
        }
        prev = row.clone();
    }
    for ((sol, v), inst) in res.best.iter().zip(&ts) {
        assert_eq!(*v, evaluate(inst, sol).unwrap());
    }
    assert!(active_search(res.model, &[], &cfg).is_err());
}

#[test]
fn active_search_checks_the_checkpoint_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Model::<f32>::new(tiny_model(), 1).unwrap().save(&path).unwrap();
    let cfg = ActiveSearchConfig { epochs: 1, batch_size: 2, ..ActiveSearchConfig::default() };
    let ts = targets();
    assert!(active_search_from_checkpoint(&path, Some(&tiny_model()), &ts, &cfg).is_ok());
    let other = ModelConfig { d: 16, ..tiny_model() };
    assert!(matches!(
        active_search_from_checkpoint(&path, Some(&other), &ts, &cfg),
        Err(TrainError::Model(lop_model::ModelError::Incompatible(_)))
    ));
    assert!(active_search_from_checkpoint(&dir.path().join("missing"), None, &ts, &cfg).is_err());
}
