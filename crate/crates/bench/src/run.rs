use std::time::{Duration, Instant};

use lop_core::solvers::{becker_construct, exact_dp, vns, Budget, DEFAULT_DP_CAP};
use lop_core::{derive_path, gap_percent, LopInstance};
use lop_model::{Model, RolloutMode};
use lop_train::{active_search, ActiveSearchConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Result;
use crate::report::{aggregate, Aggregate};
use crate::spec::{ExperimentKind, ExperimentSpec, Plan, SolverKind, ACTIVE_SEARCH_STREAM, VNS_STREAM};

/// One solver on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub instance: String,
    pub n: usize,
    pub solver: String,
    pub value: Option<f64>,
    pub reference: Option<f64>,
    pub gap_percent: Option<f64>,
    /// Work in full-evaluation equivalents; one per decoded solution for
    /// the neural solvers.
    pub evaluations: Option<f64>,
    pub wall_time_s: Option<f64>,
    /// Table column: `n=<size>` or a family label.
    pub column: String,
    /// `Exact`, `best-known`, or `best-in-run:<solver>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_solver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: ExperimentSpec,
    pub seeds: serde_json::Value,
    pub versions: serde_json::Value,
    pub model_configs: serde_json::Value,
    pub metadata: serde_json::Value,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Single-threaded, bit-reproducible execution.
    pub serial: bool,
}

/// A solver bound to its model, with the label used in reports.
struct Entry<'a> {
    kind: SolverKind,
    label: String,
    model: Option<(usize, &'a Model)>,
}

struct Outcome {
    value: f64,
    evaluations: f64,
}

fn entries(plan: &Plan) -> Vec<Entry<'_>> {
    let mut kinds = plan.spec.solvers.clone();
    kinds.sort();
    let single = plan.models.len() == 1;
    let mut out = Vec::new();
    for kind in kinds {
        if kind.uses_model() {
            for (k, m) in plan.models.iter().enumerate() {
                let label = if single {
                    kind.label().to_string()
                } else {
                    format!("{}[{}]", kind.label(), m.label)
                };
                out.push(Entry {
                    kind,
                    label,
                    model: Some((k, &m.model)),
                });
            }
        } else {
            out.push(Entry {
                kind,
                label: kind.label().to_string(),
                model: None,
            });
        }
    }
    out
}

fn solve_once(entry: &Entry<'_>, spec: &ExperimentSpec, inst: &LopInstance, vns_seed: u64) -> lop_core::Result<Outcome> {
    let res = match entry.kind {
        SolverKind::Exact => exact_dp(inst)?,
        SolverKind::Becker => becker_construct(inst)?,
        SolverKind::Vns => {
            let n = inst.n() as f64;
            let budget = Budget::new(
                Some(spec.budgets.vns_evaluations_per_n2 * n * n),
                spec.budgets.vns_time_limit_s.map(Duration::from_secs_f64),
            )?;
            vns(inst, &budget, vns_seed)?
        }
        SolverKind::Gnn | SolverKind::GnnAs => {
            let (_, model) = entry.model.expect("neural entries carry a model");
            let t = model
                .rollout(inst, RolloutMode::Greedy, 0)
                .map_err(|e| lop_core::LopError::InvalidArgument(e.to_string()))?;
            return Ok(Outcome {
                value: t.reward,
                evaluations: 1.0,
            });
        }
    };
    Ok(Outcome {
        value: res.value,
        evaluations: res.evaluations_used,
    })
}

fn row(inst: &LopInstance, column: &str, label: &str) -> Row {
    Row {
        instance: inst.name().to_string(),
        n: inst.n(),
        solver: label.to_string(),
        value: None,
        reference: None,
        gap_percent: None,
        evaluations: None,
        wall_time_s: None,
        column: column.to_string(),
        reference_solver: None,
        error: None,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn timed(entry: &Entry<'_>, spec: &ExperimentSpec, inst: &LopInstance, vns_seed: u64, reps: usize) -> (lop_core::Result<Outcome>, f64) {
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let t = Instant::now();
        let out = solve_once(entry, spec, inst, vns_seed);
        times.push(t.elapsed().as_secs_f64());
        let failed = out.is_err();
        last = Some(out);
        if failed {
            break;
        }
    }
    (last.expect("at least one repetition"), median(times))
}

/// Runs every per-instance solver on one instance.
fn solve_instance(plan: &Plan, entries: &[Entry<'_>], g: usize, k: usize, reps: usize) -> Vec<Row> {
    let group = &plan.groups[g];
    let inst = &group.instances[k];
    let vns_seed = derive_path(plan.spec.seed, &[VNS_STREAM, g as u64, k as u64]);
    entries
        .iter()
        .filter(|e| e.kind != SolverKind::GnnAs)
        .map(|e| {
            let mut r = row(inst, &group.column, &e.label);
            let (out, secs) = timed(e, &plan.spec, inst, vns_seed, reps);
            r.wall_time_s = Some(secs);
            match out {
                Ok(o) => {
                    r.value = Some(o.value);
                    r.evaluations = Some(o.evaluations);
                }
                Err(err) => r.error = Some(err.to_string()),
            }
            r
        })
        .collect()
}

fn active_search_rows(plan: &Plan, entry: &Entry<'_>, g: usize) -> Vec<Row> {
    let group = &plan.groups[g];
    let (m, model) = entry.model.expect("neural entries carry a model");
    let b = &plan.spec.budgets;
    let cfg = ActiveSearchConfig {
        epochs: b.active_search_epochs,
        batch_size: b.active_search_batch_size,
        learning_rate: b.active_search_learning_rate,
        max_grad_norm: 1.0,
        seed: derive_path(plan.spec.seed, &[ACTIVE_SEARCH_STREAM, g as u64, m as u64]),
    };
    let started = Instant::now();
    let res = active_search(model.clone(), &group.instances, &cfg);
    let per_instance = started.elapsed().as_secs_f64() / group.instances.len().max(1) as f64;
    group
        .instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let mut r = row(inst, &group.column, &entry.label);
            r.wall_time_s = Some(per_instance);
            match &res {
                Ok(res) => {
                    r.value = Some(res.best[k].1);
                    r.evaluations = Some(res.rollouts[k] as f64);
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            r
        })
        .collect()
}

/// Reference values per instance, then gaps. `rows[k]` holds every row of
/// instance `k`.
fn fill_references(plan: &Plan, g: usize, rows: &mut [Vec<Row>], serial: bool) {
    let group = &plan.groups[g];
    let exact_listed = plan.spec.solvers.contains(&SolverKind::Exact);
    let compute = |k: usize| -> Option<f64> {
        let inst = &group.instances[k];
        if exact_listed || inst.n() > DEFAULT_DP_CAP {
            return None;
        }
        exact_dp(inst).ok().map(|r| r.value)
    };
    let exact: Vec<Option<f64>> = if serial {
        (0..group.instances.len()).map(compute).collect()
    } else {
        (0..group.instances.len()).into_par_iter().map(compute).collect()
    };
    for (k, inst) in group.instances.iter().enumerate() {
        let mine = &mut rows[k];
        let listed_exact = mine
            .iter()
            .filter(|r| r.solver == SolverKind::Exact.label())
            .find_map(|r| r.value);
        let (reference, label) = match listed_exact.or(exact[k]) {
            Some(v) => (Some(v), "Exact".to_string()),
            None => {
                let best = mine
                    .iter()
                    .filter_map(|r| r.value.map(|v| (v, r.solver.as_str())))
                    .fold(None, |acc: Option<(f64, &str)>, (v, s)| match acc {
                        Some((bv, _)) if bv >= v => acc,
                        _ => Some((v, s)),
                    });
                match (best, inst.best_known()) {
                    (Some((v, _)), Some(bk)) if bk > v => (Some(bk), "best-known".to_string()),
                    (None, Some(bk)) => (Some(bk), "best-known".to_string()),
                    (Some((v, s)), _) => (Some(v), format!("best-in-run:{s}")),
                    (None, None) => (None, String::new()),
                }
            }
        };
        for r in mine.iter_mut() {
            r.reference = reference;
            r.reference_solver = reference.map(|_| label.clone());
            if let (Some(v), Some(refv)) = (r.value, reference) {
                r.gap_percent = gap_percent(v, refv).ok();
            }
        }
    }
}

/// Runs a prepared experiment. Solver failures are recorded in their rows.
pub fn run(plan: &Plan, opts: RunOptions) -> Result<BenchReport> {
    let spec = &plan.spec;
    let entries = entries(plan);
    let timing = spec.kind == ExperimentKind::Timing;
    let serial = opts.serial || timing;
    let reps = if timing { spec.repetitions } else { 1 };
    let mut rows = Vec::new();

    for (g, group) in plan.groups.iter().enumerate() {
        if group.instances.is_empty() {
            continue;
        }
        if timing {
            // Warm-up solve per solver, discarded.
            for e in entries.iter().filter(|e| e.kind != SolverKind::GnnAs) {
                let _ = solve_once(e, spec, &group.instances[0], 0);
            }
        }
        let per_instance: Vec<Vec<Row>> = if serial {
            (0..group.instances.len())
                .map(|k| solve_instance(plan, &entries, g, k, reps))
                .collect()
        } else {
            (0..group.instances.len())
                .into_par_iter()
                .map(|k| solve_instance(plan, &entries, g, k, reps))
                .collect()
        };
        let mut per_instance = per_instance;
        for e in entries.iter().filter(|e| e.kind == SolverKind::GnnAs) {
            for (k, r) in active_search_rows(plan, e, g).into_iter().enumerate() {
                per_instance[k].push(r);
            }
        }
        fill_references(plan, g, &mut per_instance, serial);
        // Instance-major order, solvers in table order within an instance.
        let order: Vec<&str> = entries.iter().map(|e| e.label.as_str()).collect();
        for mut inst_rows in per_instance {
            inst_rows.sort_by_key(|r| order.iter().position(|&l| l == r.solver));
            rows.extend(inst_rows);
        }
    }

    let aggregates = aggregate(&rows);
    let seeds = json!({
        "seed": spec.seed,
        "groups": plan.groups.iter().map(|g| json!({"column": g.column, "instance_seed": g.seed})).collect::<Vec<_>>(),
        "vns": format!("derive_path(seed, [{VNS_STREAM}, group, instance])"),
        "active_search": format!("derive_path(seed, [{ACTIVE_SEARCH_STREAM}, group, checkpoint])"),
    });
    let versions = json!({
        "lop-bench": env!("CARGO_PKG_VERSION"),
        "rng": lop_core::rng::RNG_ALGORITHM,
    });
    let model_configs = serde_json::Value::Object(
        plan.models
            .iter()
            .map(|m| {
                (
                    m.label.clone(),
                    json!({"path": m.path.display().to_string(), "config": m.model.config()}),
                )
            })
            .collect(),
    );
    let metadata = json!({
        "serial": serial,
        "threads": if serial { 1 } else { rayon::current_num_threads() },
        "record_timing": spec.records_timing(),
        "dp_cap": DEFAULT_DP_CAP,
        "hardware": format!("{} {}", std::env::consts::OS, std::env::consts::ARCH),
    });
    Ok(BenchReport {
        spec: spec.clone(),
        seeds,
        versions,
        model_configs,
        metadata,
        rows,
        aggregates,
    })
}
