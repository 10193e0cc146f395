use std::time::Instant;

use super::{Budget, EvalCounter, SolveResult};
use crate::error::{LopError, Result};
use crate::features::{edge_features, EdgeFeatures};
use crate::instance::{LopInstance, Permutation};

/// Best-improvement hill climbing over the insert neighborhood.
///
/// Each sweep prices all `n(n-1)` insert moves (one delta unit each, i.e.
/// `1/n` of an evaluation) and applies the best strictly improving one. The
/// budget is checked before every sweep, so the final count can exceed the
/// limit by at most one sweep.
pub fn insert_local_search(
    inst: &LopInstance,
    start: &Permutation,
    budget: &Budget,
) -> Result<SolveResult> {
    if start.len() != inst.n() {
        return Err(LopError::InvalidArgument(format!(
            "start permutation of size {} for instance of size {}",
            start.len(),
            inst.n()
        )));
    }
    let clock = Instant::now();
    let y = edge_features(inst);
    let mut counter = EvalCounter::new(inst.n(), budget);
    let mut order = start.as_slice().to_vec();
    counter.charge_full();
    let terminated = climb(&y, &mut order, &mut counter, improvement_tolerance(inst));
    let mut res = SolveResult::new(
        inst,
        Permutation::new(order)?,
        counter.evaluations(),
        clock.elapsed(),
        "LS",
    )?;
    res.budget_terminated = terminated;
    res.wall_time = clock.elapsed();
    Ok(res)
}

/// Moves whose gain does not exceed this are treated as non-improving, so
/// rounding noise cannot make the search cycle.
pub(crate) fn improvement_tolerance(inst: &LopInstance) -> f64 {
    let max = inst.matrix().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    1e-9 * max.max(f64::MIN_POSITIVE)
}

/// Climbs in place; returns the accumulated gain and whether the budget
/// stopped the search.
pub(crate) fn climb_with_gain(
    y: &EdgeFeatures,
    order: &mut [usize],
    counter: &mut EvalCounter,
    tol: f64,
) -> (f64, bool) {
    let n = order.len();
    let mut gained = 0.0;
    loop {
        if counter.exhausted() {
            return (gained, true);
        }
        let mut best = (0usize, 0usize, tol);
        for from in 0..n {
            let row = y.row(order[from]);
            let mut acc = 0.0;
            for (to, &u) in order.iter().enumerate().skip(from + 1) {
                acc -= row[u];
                if acc > best.2 {
                    best = (from, to, acc);
                }
            }
            let mut acc = 0.0;
            for to in (0..from).rev() {
                acc += row[order[to]];
                if acc > best.2 {
                    best = (from, to, acc);
                }
            }
        }
        counter.charge_deltas((n * (n - 1)) as u64);
        let (from, to, delta) = best;
        if from == to {
            return (gained, false);
        }
        if from < to {
            order[from..=to].rotate_left(1);
        } else {
            order[to..=from].rotate_right(1);
        }
        gained += delta;
    }
}

fn climb(y: &EdgeFeatures, order: &mut [usize], counter: &mut EvalCounter, tol: f64) -> bool {
    climb_with_gain(y, order, counter, tol).1
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::gen_uniform;
    use crate::solvers::exact_dp;

    #[test]
    fn optimum_is_a_fixed_point() {
        let inst = gen_uniform(8, 5).unwrap();
        let opt = exact_dp(&inst).unwrap();
        let res = insert_local_search(&inst, &opt.solution, &Budget::evaluations(1e6).unwrap()).unwrap();
        assert_eq!(res.solution, opt.solution);
        assert!(!res.budget_terminated);
    }

    #[test]
    fn never_worse_than_start() {
        for seed in 0..20 {
            let inst = gen_uniform(12, seed).unwrap();
            let start = Permutation::identity(12);
            let before = crate::evaluate(&inst, &start).unwrap();
            let res = insert_local_search(&inst, &start, &Budget::evaluations(1e6).unwrap()).unwrap();
            assert!(res.value >= before);
        }
    }

    #[test]
    fn tiny_budget_terminates_early() {
        let inst = gen_uniform(15, 1).unwrap();
        let res = insert_local_search(&inst, &Permutation::identity(15), &Budget::evaluations(1.0).unwrap())
            .unwrap();
        assert!(res.budget_terminated);
        // one full evaluation plus at most one sweep of 15*14 deltas
        assert!(res.evaluations_used <= 1.0 + 14.0);
    }
}
