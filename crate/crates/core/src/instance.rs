use crate::error::{LopError, Result};

/// A square weight matrix together with a label and an optional reference
/// objective value.
///
/// `weight(i, j)` is the gain collected when item `i` is ranked before item
/// `j`. The diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LopInstance {
    n: usize,
    b: Vec<f64>,
    name: String,
    best_known: Option<f64>,
}

impl LopInstance {
    /// Builds an instance from a row-major matrix. The diagonal is zeroed.
    pub fn new(name: impl Into<String>, n: usize, mut b: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(LopError::InvalidInstance(format!(
                "instance size must be at least 2, got {n}"
            )));
        }
        if b.len() != n * n {
            return Err(LopError::InvalidInstance(format!(
                "expected {} matrix entries for n={n}, got {}",
                n * n,
                b.len()
            )));
        }
        if let Some(pos) = b.iter().position(|v| !v.is_finite()) {
            return Err(LopError::InvalidInstance(format!(
                "non-finite weight at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        for i in 0..n {
            b[i * n + i] = 0.0;
        }
        Ok(Self {
            n,
            b,
            name: name.into(),
            best_known: None,
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().position(|r| r.len() != n) {
            return Err(LopError::InvalidInstance(format!(
                "row {r} has {} entries, expected {n}",
                rows[r].len()
            )));
        }
        Self::new(name, n, rows.concat())
    }

    pub fn with_best_known(mut self, value: Option<f64>) -> Self {
        self.best_known = value;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.b[i * self.n..(i + 1) * self.n]
    }

    /// Row-major weights.
    pub fn matrix(&self) -> &[f64] {
        &self.b
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn best_known(&self) -> Option<f64> {
        self.best_known
    }

    pub fn off_diagonal_sum(&self) -> f64 {
        self.b.iter().sum()
    }

    /// Off-diagonal entries in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.b
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &v)| v)
    }

    /// Instance whose item `i` is item `sigma[i]` of `self`.
    pub fn relabel(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.n {
            return Err(LopError::InvalidArgument(format!(
                "relabeling of size {} for instance of size {}",
                sigma.len(),
                self.n
            )));
        }
        let n = self.n;
        let s = sigma.as_slice();
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = self.b[s[i] * n + s[j]];
            }
        }
        Ok(Self {
            n,
            b,
            name: self.name.clone(),
            best_known: self.best_known,
        })
    }
}

/// A bijection on `{0, .., n-1}`; `order[k]` is the item placed at rank `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n {
                return Err(LopError::InvalidArgument(format!(
                    "index {v} out of range for permutation of size {n}"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(LopError::InvalidArgument(format!(
                    "index {v} appears more than once"
                )));
            }
        }
        Ok(Self { order })
    }

    /// Parses 1-based item labels, the convention used by files and the CLI.
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        let zero = order
            .iter()
            .map(|&v| {
                v.checked_sub(1).ok_or_else(|| {
                    LopError::InvalidArgument("1-based permutation contains 0".into())
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.order
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.order.iter().map(|v| v + 1).collect()
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Self { order }
    }

    /// `positions()[item]` is the rank of `item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (rank, &item) in self.order.iter().enumerate() {
            pos[item] = rank;
        }
        pos
    }

    pub fn inverse(&self) -> Self {
        Self {
            order: self.positions(),
        }
    }

    /// Moves the item at rank `from` to rank `to`, shifting the items in
    /// between by one position.
    pub fn insert_move(&mut self, from: usize, to: usize) -> Result<()> {
        let n = self.order.len();
        if from >= n || to >= n {
            return Err(LopError::InvalidArgument(format!(
                "insert move {from} -> {to} out of range for size {n}"
            )));
        }
        if from < to {
            self.order[from..=to].rotate_left(1);
        } else if to < from {
            self.order[to..=from].rotate_right(1);
        }
        Ok(())
    }

    /// Applies `self` after mapping every item through `map`.
    pub fn map_items(&self, map: &[usize]) -> Result<Self> {
        Self::new(self.order.iter().map(|&v| map[v]).collect())
    }
}

impl std::fmt::Display for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let labels: Vec<String> = self.order.iter().map(|v| (v + 1).to_string()).collect();
        write!(f, "({})", labels.join(" "))
    }
}
