//! Classical LOP solvers used as baselines and oracles.

mod becker;
mod brute;
mod budget;
mod exact;
mod local_search;
mod vns;

use std::time::Duration;

pub use becker::becker_construct;
pub use brute::{brute_force, BRUTE_FORCE_MAX_N};
pub use budget::{Budget, EvalCounter};
pub use exact::{exact_dp, exact_dp_with_cap, DEFAULT_DP_CAP};
pub use local_search::insert_local_search;
pub use vns::{vns, vns_with_trace, VnsConfig, VNS_LABEL};

use crate::error::Result;
use crate::instance::{LopInstance, Permutation};
use crate::objective::evaluate;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub solution: Permutation,
    /// Objective of `solution`, recomputed on construction.
    pub value: f64,
    /// Work in full-evaluation equivalents (one insert delta is `1/n`).
    pub evaluations_used: f64,
    pub wall_time: Duration,
    pub solver: String,
    /// The search stopped because its budget ran out.
    pub budget_terminated: bool,
}

impl SolveResult {
    pub fn new(
        inst: &LopInstance,
        solution: Permutation,
        evaluations_used: f64,
        wall_time: Duration,
        solver: impl Into<String>,
    ) -> Result<Self> {
        let value = evaluate(inst, &solution)?;
        Ok(Self {
            solution,
            value,
            evaluations_used,
            wall_time,
            solver: solver.into(),
            budget_terminated: false,
        })
    }
}
