use std::time::Instant;

use super::SolveResult;
use crate::error::{LopError, Result};
use crate::instance::{LopInstance, Permutation};

/// Largest size accepted by [`exact_dp`]; memory grows as `2^n`.
pub const DEFAULT_DP_CAP: usize = 22;

pub fn exact_dp(inst: &LopInstance) -> Result<SolveResult> {
    exact_dp_with_cap(inst, DEFAULT_DP_CAP)
}

/// Exact optimum by dynamic programming over the set of unplaced items.
///
/// `best[S]` is the largest contribution obtainable from the items in `S`
/// when they occupy the last `|S|` ranks: placing `v` first among them
/// collects `b[v][u]` for every other `u` in `S`. Runs in `O(2^n n^2)` time
/// and `O(2^n)` space. Ties keep the lowest item index.
pub fn exact_dp_with_cap(inst: &LopInstance, cap: usize) -> Result<SolveResult> {
    let n = inst.n();
    if n > cap || n >= 32 {
        return Err(LopError::Capacity(format!(
            "exact DP is limited to n <= {cap} (got n = {n}); use a heuristic solver"
        )));
    }
    let start = Instant::now();
    let full = (1usize << n) - 1;
    let mut best = vec![0.0f64; full + 1];
    let mut choice = vec![0u8; full + 1];
    let mut members = Vec::with_capacity(n);
    for set in 1..=full {
        members.clear();
        let mut rest = set;
        while rest != 0 {
            members.push(rest.trailing_zeros() as usize);
            rest &= rest - 1;
        }
        let mut top = f64::NEG_INFINITY;
        let mut arg = 0u8;
        for &v in &members {
            let row = inst.row(v);
            let gain: f64 = members.iter().map(|&u| row[u]).sum::<f64>() + best[set ^ (1 << v)];
            if gain > top {
                top = gain;
                arg = v as u8;
            }
        }
        best[set] = top;
        choice[set] = arg;
    }
    let mut order = Vec::with_capacity(n);
    let mut set = full;
    while set != 0 {
        let v = choice[set] as usize;
        order.push(v);
        set ^= 1 << v;
    }
    let mut res = SolveResult::new(inst, Permutation::new(order)?, 0.0, start.elapsed(), "Exact")?;
    res.wall_time = start.elapsed();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_items() {
        let inst = LopInstance::from_rows("t", &[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let res = exact_dp(&inst).unwrap();
        assert_eq!(res.value, 3.0);
        assert_eq!(res.solution.as_slice(), &[0, 1]);
    }

    #[test]
    fn symmetric_optimum_is_half_the_total() {
        let rows = vec![
            vec![0.0, 2.0, 4.0, 1.0],
            vec![2.0, 0.0, 3.0, 5.0],
            vec![4.0, 3.0, 0.0, 6.0],
            vec![1.0, 5.0, 6.0, 0.0],
        ];
        let inst = LopInstance::from_rows("sym", &rows).unwrap();
        assert_eq!(exact_dp(&inst).unwrap().value, inst.off_diagonal_sum() / 2.0);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = LopInstance::new("big", 6, vec![1.0; 36]).unwrap();
        let err = exact_dp_with_cap(&inst, 5).unwrap_err();
        assert!(matches!(err, LopError::Capacity(_)));
    }
}
