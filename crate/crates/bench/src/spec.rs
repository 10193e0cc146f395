//! Experiment descriptions.
//!
//! A spec is a JSON object; only `kind` and `solvers` are required.
//!
//! ```json
//! {
//!   "kind": "performance",
//!   "solvers": ["exact", "becker", "vns", "gnn"],
//!   "source": { "type": "uniform" },
//!   "sizes": [12],
//!   "instances": 100,
//!   "seed": 7,
//!   "checkpoints": [{ "label": "n15", "path": "runs/desk/best.ckpt" }]
//! }
//! ```
//!
//! `source` is `{"type": "uniform"}` (default), `{"type": "subsample",
//! "path": ...}` with a LOLIB file or dataset directory as the pool, or
//! `{"type": "dataset", "path": ...}`. Transfer experiments list
//! `families`, each `{ "label", "source" }`, instead of one source.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use lop_core::io::{generate, load_dataset, read_lolib_file, GeneratorKind, GeneratorSpec};
use lop_core::solvers::DEFAULT_DP_CAP;
use lop_core::{derive_path, LopInstance};
use lop_model::Model;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub(crate) const INSTANCE_STREAM: u64 = 1;
pub(crate) const VNS_STREAM: u64 = 2;
pub(crate) const ACTIVE_SEARCH_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Solution quality of every solver on every instance.
    Performance,
    /// Per-solver wall time: one warm-up solve per solver and group, then the
    /// median of `repetitions` solves per instance.
    Timing,
    /// Each checkpoint across all sizes.
    Generalization,
    /// Each checkpoint across all instance families.
    Transfer,
}

/// Solvers in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Exact,
    Becker,
    Vns,
    /// Greedy decoding of a trained model.
    Gnn,
    /// Active search on the run's instances, starting from a checkpoint.
    GnnAs,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [Self::Exact, Self::Becker, Self::Vns, Self::Gnn, Self::GnnAs];

    pub fn label(self) -> &'static str {
        match self {
            Self::Exact => "Exact",
            Self::Becker => "Becker",
            Self::Vns => "VNS",
            Self::Gnn => "GNN",
            Self::GnnAs => "GNN-AS",
        }
    }

    pub fn uses_model(self) -> bool {
        matches!(self, Self::Gnn | Self::GnnAs)
    }

    /// Kind of a report label such as `GNN` or `GNN[n15]`.
    pub fn of_label(label: &str) -> Option<SolverKind> {
        let base = label.split('[').next().unwrap_or(label);
        Self::ALL.into_iter().find(|k| k.label() == base)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InstanceSource {
    Uniform,
    Subsample { path: PathBuf },
    Dataset { path: PathBuf },
}

impl Default for InstanceSource {
    fn default() -> Self {
        Self::Uniform
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub label: String,
    pub source: InstanceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub label: String,
    pub path: PathBuf,
}

fn default_vns_factor() -> f64 {
    1000.0
}

fn default_as_epochs() -> usize {
    100
}

fn default_as_batch() -> usize {
    32
}

fn default_as_lr() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// VNS evaluation budget as a multiple of `n^2`.
    #[serde(default = "default_vns_factor")]
    pub vns_evaluations_per_n2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vns_time_limit_s: Option<f64>,
    #[serde(default = "default_as_epochs")]
    pub active_search_epochs: usize,
    #[serde(default = "default_as_batch")]
    pub active_search_batch_size: usize,
    #[serde(default = "default_as_lr")]
    pub active_search_learning_rate: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            vns_evaluations_per_n2: default_vns_factor(),
            vns_time_limit_s: None,
            active_search_epochs: default_as_epochs(),
            active_search_batch_size: default_as_batch(),
            active_search_learning_rate: default_as_lr(),
        }
    }
}

fn default_instances() -> usize {
    10
}

fn default_repetitions() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub source: InstanceSource,
    /// Transfer experiments only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<Family>,
    /// Sizes to generate; for datasets, an optional filter.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Generated instances per size (and per family).
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Timed solves per instance in timing experiments.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<CheckpointRef>,
    /// Write wall times into `report.csv`. Defaults to true for timing
    /// experiments only, so other reports are byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_timing: Option<bool>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn records_timing(&self) -> bool {
        self.record_timing.unwrap_or(self.kind == ExperimentKind::Timing)
    }

    /// Checks everything that does not need the instances or checkpoints.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Spec(m));
        if self.solvers.is_empty() {
            return fail("no solvers listed".into());
        }
        let distinct: BTreeSet<_> = self.solvers.iter().collect();
        if distinct.len() != self.solvers.len() {
            return fail("a solver is listed twice".into());
        }
        if self.instances == 0 || self.repetitions == 0 {
            return fail("instances and repetitions must be positive".into());
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 2) {
            return fail(format!("instance size {n} is below 2"));
        }
        let generated = |s: &InstanceSource| !matches!(s, InstanceSource::Dataset { .. });
        if self.kind == ExperimentKind::Transfer {
            if self.families.is_empty() {
                return fail("a transfer experiment needs at least one family".into());
            }
            let labels: BTreeSet<_> = self.families.iter().map(|f| f.label.as_str()).collect();
            if labels.len() != self.families.len() {
                return fail("family labels must be unique".into());
            }
            if let Some(f) = self.families.iter().find(|f| !valid_label(&f.label)) {
                return fail(format!("family label {:?} must be nonempty without whitespace or '/'", f.label));
            }
            if self.families.iter().any(|f| generated(&f.source)) && self.sizes.is_empty() {
                return fail("generated families need sizes".into());
            }
        } else if generated(&self.source) && self.sizes.is_empty() {
            return fail("generated instances need sizes".into());
        }
        if self.solvers.contains(&SolverKind::Exact) {
            if let Some(&n) = self.sizes.iter().find(|&&n| n > DEFAULT_DP_CAP) {
                return fail(format!("exact solver requested for n = {n} above the cap {DEFAULT_DP_CAP}"));
            }
        }
        let needs_model = matches!(self.kind, ExperimentKind::Generalization | ExperimentKind::Transfer)
            || self.solvers.iter().any(|s| s.uses_model());
        if needs_model && self.checkpoints.is_empty() {
            return fail("this experiment needs at least one checkpoint".into());
        }
        if needs_model && !self.solvers.iter().any(|s| s.uses_model()) {
            return fail("list gnn or gnn-as to evaluate the checkpoints".into());
        }
        let labels: BTreeSet<_> = self.checkpoints.iter().map(|c| c.label.as_str()).collect();
        if labels.len() != self.checkpoints.len() {
            return fail("checkpoint labels must be unique".into());
        }
        if let Some(c) = self.checkpoints.iter().find(|c| !valid_label(&c.label)) {
            return fail(format!("checkpoint label {:?} must be nonempty without whitespace", c.label));
        }
        let b = &self.budgets;
        if !(b.vns_evaluations_per_n2.is_finite() && b.vns_evaluations_per_n2 > 0.0) {
            return fail("VNS budget must be positive".into());
        }
        if b.vns_time_limit_s.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            return fail("VNS time limit must be positive".into());
        }
        if b.active_search_batch_size == 0 || !(b.active_search_learning_rate > 0.0) {
            return fail("active search needs a positive batch size and learning rate".into());
        }
        Ok(())
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && !s.contains(char::is_whitespace) && !s.contains('/') && !s.contains(',')
}

/// Instance pool for subsampling: a LOLIB file or a dataset directory.
pub fn load_sources(path: &Path) -> Result<Vec<LopInstance>> {
    if path.is_dir() {
        Ok(load_dataset(path)?.instances)
    } else {
        Ok(vec![read_lolib_file(path)?])
    }
}

/// Instances sharing one table column.
pub struct Group {
    /// `n=<size>`, or the family label in transfer experiments.
    pub column: String,
    pub instances: Vec<LopInstance>,
    /// Seed of the generator family, when generated.
    pub seed: Option<u64>,
}

pub struct LoadedModel {
    pub label: String,
    pub path: PathBuf,
    pub model: Model,
}

/// A validated spec with its instances and models loaded.
pub struct Plan {
    pub spec: ExperimentSpec,
    pub groups: Vec<Group>,
    pub models: Vec<LoadedModel>,
}

fn source_groups(spec: &ExperimentSpec, source: &InstanceSource, family: Option<&str>) -> Result<Vec<Group>> {
    let prefix = |name: &str| match family {
        Some(f) => format!("{f}/{}", name.replace('/', "_")),
        None => name.replace('/', "_"),
    };
    let column = |n: usize| family.map_or_else(|| format!("n={n}"), str::to_string);
    let kind = match source {
        InstanceSource::Dataset { path } => {
            let ds = load_dataset(path).map_err(|e| BenchError::Spec(format!("{}: {e}", path.display())))?;
            let mut sizes: Vec<usize> = ds.instances.iter().map(|i| i.n()).collect();
            sizes.sort_unstable();
            sizes.dedup();
            if !spec.sizes.is_empty() {
                sizes.retain(|n| spec.sizes.contains(n));
            }
            let mut groups: Vec<Group> = Vec::new();
            for n in sizes {
                let instances: Vec<LopInstance> = ds
                    .instances
                    .iter()
                    .filter(|i| i.n() == n)
                    .map(|i| i.clone().with_name(prefix(i.name())))
                    .collect();
                match (family, groups.last_mut()) {
                    (Some(_), Some(g)) => g.instances.extend(instances),
                    _ => groups.push(Group {
                        column: column(n),
                        instances,
                        seed: None,
                    }),
                }
            }
            return Ok(groups);
        }
        InstanceSource::Uniform => (GeneratorKind::Uniform, Vec::new()),
        InstanceSource::Subsample { path } => (
            GeneratorKind::Subsample,
            load_sources(path).map_err(|e| BenchError::Spec(format!("{}: {e}", path.display())))?,
        ),
    };
    let (gen_kind, pool) = kind;
    let family_index = spec
        .families
        .iter()
        .position(|f| Some(f.label.as_str()) == family)
        .map_or(0, |k| k as u64 + 1);
    let mut groups: Vec<Group> = Vec::new();
    for &n in &spec.sizes {
        let seed = derive_path(spec.seed, &[INSTANCE_STREAM, family_index, n as u64]);
        let gspec = GeneratorSpec {
            kind: gen_kind,
            n,
            seed,
            source: None,
        };
        let instances = (0..spec.instances as u64)
            .map(|k| generate(&gspec, &pool, k).map(|i| {
                let name = prefix(i.name());
                i.with_name(name)
            }))
            .collect::<lop_core::Result<Vec<_>>>()?;
        match (family, groups.last_mut()) {
            (Some(_), Some(g)) => g.instances.extend(instances),
            _ => groups.push(Group {
                column: column(n),
                instances,
                seed: Some(seed),
            }),
        }
    }
    Ok(groups)
}

impl Plan {
    /// Validates `spec`, loads or generates its instances and loads its
    /// checkpoints. Every failure here is a spec error: nothing has run.
    pub fn prepare(spec: ExperimentSpec) -> Result<Plan> {
        spec.validate()?;
        let groups = if spec.kind == ExperimentKind::Transfer {
            let mut groups = Vec::new();
            for f in &spec.families {
                groups.extend(source_groups(&spec, &f.source, Some(&f.label))?);
            }
            groups
        } else {
            source_groups(&spec, &spec.source, None)?
        };
        if groups.iter().all(|g| g.instances.is_empty()) {
            return Err(BenchError::Spec("the experiment selects no instances".into()));
        }
        if spec.solvers.contains(&SolverKind::Exact) {
            let too_big = groups.iter().flat_map(|g| &g.instances).find(|i| i.n() > DEFAULT_DP_CAP);
            if let Some(inst) = too_big {
                return Err(BenchError::Spec(format!(
                    "exact solver requested for {} (n = {}) above the cap {DEFAULT_DP_CAP}",
                    inst.name(),
                    inst.n()
                )));
            }
        }

        let mut models = Vec::new();
        let mut reference_arch = None;
        for c in &spec.checkpoints {
            if !c.path.is_file() {
                return Err(BenchError::Spec(format!("checkpoint {} does not exist", c.path.display())));
            }
            let model = Model::load(&c.path)
                .map_err(|e| BenchError::Spec(format!("checkpoint {}: {e}", c.path.display())))?;
            // Generalization and transfer compare checkpoints of one architecture.
            if matches!(spec.kind, ExperimentKind::Generalization | ExperimentKind::Transfer) {
                let cfg = *model.config();
                match reference_arch {
                    None => reference_arch = Some(cfg),
                    Some(r) if !r.same_architecture(&cfg) => {
                        return Err(BenchError::Spec(format!(
                            "checkpoint {} differs in architecture from the first checkpoint",
                            c.path.display()
                        )))
                    }
                    _ => {}
                }
            }
            models.push(LoadedModel {
                label: c.label.clone(),
                path: c.path.clone(),
                model,
            });
        }
        Ok(Plan { spec, groups, models })
    }
}
