use crate::error::{LopError, Result};
use crate::instance::{LopInstance, Permutation};

fn check_size(inst: &LopInstance, sol: &Permutation) -> Result<()> {
    if sol.len() != inst.n() {
        return Err(LopError::InvalidArgument(format!(
            "permutation of size {} for instance of size {}",
            sol.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Sum of `b[order[k]][order[l]]` over all rank pairs `k < l`.
///
/// Summation runs row by row in rank order, so the result is bit-identical
/// for identical inputs.
pub fn evaluate(inst: &LopInstance, sol: &Permutation) -> Result<f64> {
    check_size(inst, sol)?;
    Ok(evaluate_order(inst, sol.as_slice()))
}

pub(crate) fn evaluate_order(inst: &LopInstance, order: &[usize]) -> f64 {
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let row = inst.row(i);
        for &j in &order[k + 1..] {
            total += row[j];
        }
    }
    total
}

/// Change in objective caused by moving the item at rank `from_rank` to
/// `to_rank`; `sol` itself is left untouched.
///
/// Only the pairs between the moved item and the displaced span change
/// orientation, so the cost is `O(|from_rank - to_rank|)`.
pub fn evaluate_insert_delta(
    inst: &LopInstance,
    sol: &Permutation,
    from_rank: usize,
    to_rank: usize,
) -> Result<f64> {
    check_size(inst, sol)?;
    let n = inst.n();
    if from_rank >= n || to_rank >= n {
        return Err(LopError::InvalidArgument(format!(
            "ranks {from_rank} -> {to_rank} out of range for size {n}"
        )));
    }
    Ok(insert_delta_order(inst, sol.as_slice(), from_rank, to_rank))
}

pub(crate) fn insert_delta_order(inst: &LopInstance, order: &[usize], from: usize, to: usize) -> f64 {
    let v = order[from];
    let mut delta = 0.0;
    if from < to {
        for &u in &order[from + 1..=to] {
            delta += inst.weight(u, v) - inst.weight(v, u);
        }
    } else {
        for &u in &order[to..from] {
            delta += inst.weight(v, u) - inst.weight(u, v);
        }
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> LopInstance {
        LopInstance::from_rows("two", &[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn zero_matrix_scores_zero() {
        let inst = LopInstance::new("z", 4, vec![0.0; 16]).unwrap();
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(evaluate(&inst, &p).unwrap(), 0.0);
    }

    #[test]
    fn all_ones_scores_half_the_pairs() {
        let inst = LopInstance::new("ones", 5, vec![1.0; 25]).unwrap();
        for order in [vec![0, 1, 2, 3, 4], vec![4, 2, 0, 1, 3]] {
            let p = Permutation::new(order).unwrap();
            assert_eq!(evaluate(&inst, &p).unwrap(), 10.0);
        }
    }

    #[test]
    fn two_item_values() {
        let inst = two();
        assert_eq!(evaluate(&inst, &Permutation::new(vec![0, 1]).unwrap()).unwrap(), 3.0);
        assert_eq!(evaluate(&inst, &Permutation::new(vec![1, 0]).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let inst = two();
        assert!(evaluate(&inst, &Permutation::identity(3)).is_err());
        assert!(evaluate_insert_delta(&inst, &Permutation::identity(3), 0, 1).is_err());
    }

    #[test]
    fn delta_examples() {
        let inst = two();
        let p = Permutation::identity(2);
        assert_eq!(evaluate_insert_delta(&inst, &p, 1, 1).unwrap(), 0.0);
        assert_eq!(evaluate_insert_delta(&inst, &p, 0, 1).unwrap(), -2.0);
        assert!(evaluate_insert_delta(&inst, &p, 0, 2).is_err());
    }
}
