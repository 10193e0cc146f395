//! Checks a candidate ordering against the acyclic-tournament constraints:
//! exactly one orientation per pair (`x_ij + x_ji = 1`) and no directed
//! 3-cycles (`x_ij + x_jk + x_ki <= 2`), where `x_ij = 1` iff `i` precedes
//! `j`.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TournamentReport {
    /// Entries of the sequence that are not items of `{0, .., n-1}`.
    pub out_of_range: Vec<usize>,
    /// Pairs `(i, j)`, `i < j`, with `x_ij + x_ji != 1`.
    pub completeness_violations: Vec<(usize, usize)>,
    /// Triples `(i, j, k)` with `x_ij + x_jk + x_ki > 2`.
    pub cycle_violations: Vec<(usize, usize, usize)>,
}

impl TournamentReport {
    pub fn is_valid(&self) -> bool {
        self.out_of_range.is_empty()
            && self.completeness_violations.is_empty()
            && self.cycle_violations.is_empty()
    }
}

/// Validates an arbitrary item sequence for an instance of size `n`.
///
/// `i` precedes `j` when some occurrence of `i` comes before some
/// occurrence of `j`, so repeated or missing items show up as completeness
/// violations.
pub fn validate_tournament(n: usize, order: &[usize]) -> TournamentReport {
    let mut report = TournamentReport::default();
    let mut first = vec![usize::MAX; n];
    let mut last = vec![usize::MAX; n];
    for (rank, &item) in order.iter().enumerate() {
        if item >= n {
            report.out_of_range.push(item);
            continue;
        }
        if first[item] == usize::MAX {
            first[item] = rank;
        }
        last[item] = rank;
    }
    let precedes = |i: usize, j: usize| -> u8 {
        (first[i] != usize::MAX && last[j] != usize::MAX && first[i] < last[j]) as u8
    };
    for i in 0..n {
        for j in i + 1..n {
            if precedes(i, j) + precedes(j, i) != 1 {
                report.completeness_violations.push((i, j));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in i + 1..n {
                if j != k && precedes(i, j) + precedes(j, k) + precedes(k, i) > 2 {
                    report.cycle_violations.push((i, j, k));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_valid() {
        for n in 2..8 {
            let order: Vec<usize> = (0..n).collect();
            assert!(validate_tournament(n, &order).is_valid());
        }
    }

    #[test]
    fn repeated_index_breaks_completeness() {
        let report = validate_tournament(3, &[0, 1, 1]);
        assert!(!report.is_valid());
        assert!(report.completeness_violations.contains(&(0, 2)));
        assert!(report.completeness_violations.contains(&(1, 2)));
    }

    #[test]
    fn cyclic_repetition_is_flagged() {
        // 0 before 1, 1 before 2, and a second 0 after 2 closes a cycle.
        let report = validate_tournament(3, &[0, 1, 2, 0]);
        assert!(!report.cycle_violations.is_empty());
    }

    #[test]
    fn out_of_range_entries_are_reported() {
        let report = validate_tournament(2, &[0, 5]);
        assert_eq!(report.out_of_range, vec![5]);
        assert!(!report.is_valid());
    }
}
