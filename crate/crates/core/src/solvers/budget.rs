use std::time::{Duration, Instant};

use crate::error::{LopError, Result};

/// Stopping limits for the iterative solvers. At least one limit is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    max_evaluations: Option<f64>,
    max_time: Option<Duration>,
}

impl Budget {
    pub fn new(max_evaluations: Option<f64>, max_time: Option<Duration>) -> Result<Self> {
        if max_evaluations.is_none() && max_time.is_none() {
            return Err(LopError::InvalidArgument(
                "budget needs an evaluation or a time limit".into(),
            ));
        }
        if max_evaluations.is_some_and(|e| !(e > 0.0)) {
            return Err(LopError::InvalidArgument(
                "evaluation limit must be positive".into(),
            ));
        }
        if max_time.is_some_and(|t| t.is_zero()) {
            return Err(LopError::InvalidArgument("time limit must be positive".into()));
        }
        Ok(Self {
            max_evaluations,
            max_time,
        })
    }

    pub fn evaluations(max: f64) -> Result<Self> {
        Self::new(Some(max), None)
    }

    /// `factor * n^2` evaluations; the metaheuristic default uses 1000.
    pub fn per_n_squared(n: usize, factor: f64) -> Self {
        Self {
            max_evaluations: Some(factor * (n * n) as f64),
            max_time: None,
        }
    }

    pub fn max_evaluations(&self) -> Option<f64> {
        self.max_evaluations
    }

    pub fn max_time(&self) -> Option<Duration> {
        self.max_time
    }
}

/// Counts objective work in units of one insert delta; a full evaluation
/// costs `n` units, so `evaluations()` is in full-evaluation equivalents.
#[derive(Debug, Clone)]
pub struct EvalCounter {
    n: u64,
    units: u64,
    limit_units: Option<u64>,
    deadline: Option<Instant>,
}

impl EvalCounter {
    pub fn new(n: usize, budget: &Budget) -> Self {
        let n = n as u64;
        Self {
            n,
            units: 0,
            limit_units: budget
                .max_evaluations
                .map(|e| (e * n as f64).floor().min(u64::MAX as f64) as u64),
            deadline: budget.max_time.map(|t| Instant::now() + t),
        }
    }

    pub fn charge_full(&mut self) {
        self.units += self.n;
    }

    pub fn charge_deltas(&mut self, count: u64) {
        self.units += count;
    }

    pub fn evaluations(&self) -> f64 {
        self.units as f64 / self.n as f64
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn limit_units(&self) -> Option<u64> {
        self.limit_units
    }

    pub fn exhausted(&self) -> bool {
        self.limit_units.is_some_and(|l| self.units >= l)
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_requires_a_positive_limit() {
        assert!(Budget::new(None, None).is_err());
        assert!(Budget::new(Some(0.0), None).is_err());
        assert!(Budget::new(None, Some(Duration::ZERO)).is_err());
        assert!(Budget::new(Some(10.0), None).is_ok());
        assert_eq!(Budget::per_n_squared(20, 1000.0).max_evaluations(), Some(400_000.0));
    }

    #[test]
    fn deltas_cost_one_nth() {
        let mut c = EvalCounter::new(10, &Budget::evaluations(2.0).unwrap());
        c.charge_full();
        assert_eq!(c.evaluations(), 1.0);
        c.charge_deltas(5);
        assert_eq!(c.evaluations(), 1.5);
        assert!(!c.exhausted());
        c.charge_deltas(5);
        assert!(c.exhausted());
    }
}
