use std::time::Instant;

use super::SolveResult;
use crate::error::Result;
use crate::instance::{LopInstance, Permutation};

/// Becker's constructive heuristic.
///
/// Repeatedly places next the unplaced item with the largest quotient of
/// outgoing to incoming weight among unplaced items. A zero incoming sum
/// counts as an infinite quotient; ties go to the lowest index. Row and
/// column sums are maintained incrementally, giving `O(n^2)` overall.
pub fn becker_construct(inst: &LopInstance) -> Result<SolveResult> {
    let start = Instant::now();
    let n = inst.n();
    let mut out_sum: Vec<f64> = (0..n).map(|i| inst.row(i).iter().sum()).collect();
    let mut in_sum = vec![0.0; n];
    for i in 0..n {
        for (j, s) in in_sum.iter_mut().enumerate() {
            *s += inst.weight(i, j);
        }
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !placed[i]) {
            let q = if in_sum[i] == 0.0 {
                f64::INFINITY
            } else {
                out_sum[i] / in_sum[i]
            };
            if best.map_or(true, |(_, bq)| q > bq) {
                best = Some((i, q));
            }
        }
        let (v, _) = best.expect("an unplaced item remains");
        placed[v] = true;
        order.push(v);
        for u in (0..n).filter(|&u| !placed[u]) {
            out_sum[u] -= inst.weight(u, v);
            in_sum[u] -= inst.weight(v, u);
        }
    }
    let mut res = SolveResult::new(inst, Permutation::new(order)?, 1.0, start.elapsed(), "Becker")?;
    res.wall_time = start.elapsed();
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matrix_gives_identity() {
        let inst = LopInstance::new("c", 6, vec![2.5; 36]).unwrap();
        assert_eq!(becker_construct(&inst).unwrap().solution, Permutation::identity(6));
    }

    #[test]
    fn zero_matrix_is_valid() {
        let inst = LopInstance::new("z", 5, vec![0.0; 25]).unwrap();
        let res = becker_construct(&inst).unwrap();
        assert_eq!(res.solution, Permutation::identity(5));
        assert_eq!(res.value, 0.0);
    }

    #[test]
    fn two_items() {
        let inst = LopInstance::from_rows("t", &[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let res = becker_construct(&inst).unwrap();
        assert_eq!(res.solution.as_slice(), &[0, 1]);
        assert_eq!(res.value, 3.0);
    }

    #[test]
    fn item_without_incoming_weight_goes_first() {
        let inst = LopInstance::from_rows(
            "src",
            &[vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 9.0], vec![0.0, 1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(becker_construct(&inst).unwrap().solution.as_slice()[0], 0);
    }
}
