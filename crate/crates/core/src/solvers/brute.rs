use std::time::Instant;

use super::SolveResult;
use crate::error::{LopError, Result};
use crate::instance::{LopInstance, Permutation};
use crate::objective::evaluate_order;

pub const BRUTE_FORCE_MAX_N: usize = 9;

/// Enumerates all `n!` orderings in lexicographic order and keeps the first
/// maximizer, i.e. the lexicographically smallest optimal permutation.
pub fn brute_force(inst: &LopInstance) -> Result<SolveResult> {
    let n = inst.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(LopError::Capacity(format!(
            "brute force is limited to n <= {BRUTE_FORCE_MAX_N} (got n = {n})"
        )));
    }
    let start = Instant::now();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best_order = order.clone();
    let mut best = evaluate_order(inst, &order);
    let mut count = 1u64;
    while next_permutation(&mut order) {
        count += 1;
        let v = evaluate_order(inst, &order);
        if v > best {
            best = v;
            best_order.copy_from_slice(&order);
        }
    }
    let mut res = SolveResult::new(
        inst,
        Permutation::new(best_order)?,
        count as f64,
        start.elapsed(),
        "Brute",
    )?;
    res.wall_time = start.elapsed();
    Ok(res)
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_items_take_the_larger_weight() {
        let inst = LopInstance::from_rows("t", &[vec![0.0, 1.0], vec![4.0, 0.0]]).unwrap();
        let res = brute_force(&inst).unwrap();
        assert_eq!(res.value, 4.0);
        assert_eq!(res.solution.as_slice(), &[1, 0]);
    }

    #[test]
    fn zero_matrix_returns_identity() {
        let inst = LopInstance::new("z", 5, vec![0.0; 25]).unwrap();
        let res = brute_force(&inst).unwrap();
        assert_eq!(res.solution, Permutation::identity(5));
        assert_eq!(res.evaluations_used, 120.0);
    }

    #[test]
    fn rejects_large_instances() {
        let inst = LopInstance::new("big", 10, vec![1.0; 100]).unwrap();
        assert!(matches!(brute_force(&inst), Err(LopError::Capacity(_))));
    }

    #[test]
    fn enumerates_in_lexicographic_order() {
        let mut a = vec![0, 1, 2];
        let mut seen = vec![a.clone()];
        while next_permutation(&mut a) {
            seen.push(a.clone());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }
}
