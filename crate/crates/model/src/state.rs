use lop_core::{edge_features, EdgeFeatures, LopInstance};

use crate::error::{ModelError, Result};

/// Partial solution during decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderState {
    n: usize,
    placed: Vec<usize>,
    mask: Vec<bool>,
}

impl DecoderState {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            placed: Vec::with_capacity(n),
            mask: vec![false; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Items placed so far, in order.
    pub fn placed(&self) -> &[usize] {
        &self.placed
    }

    /// `mask[i]` is true when item `i` is placed.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// 1-based index of the next decoding step.
    pub fn step(&self) -> usize {
        self.placed.len() + 1
    }

    pub fn is_complete(&self) -> bool {
        self.placed.len() == self.n
    }

    pub fn unplaced(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| !self.mask[i])
    }

    pub fn place(&mut self, item: usize) -> Result<()> {
        if item >= self.n {
            return Err(ModelError::State(format!("item {item} out of range for n = {}", self.n)));
        }
        if self.mask[item] {
            return Err(ModelError::State(format!("item {item} is already placed")));
        }
        self.mask[item] = true;
        self.placed.push(item);
        Ok(())
    }
}

/// Per-node state features: `[placed flag, rank / n]`, rank 1-based, with
/// unplaced rows exactly `[0, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStateFeatures {
    pub n: usize,
    /// Row-major `n x 2`.
    pub x: Vec<f64>,
}

impl NodeStateFeatures {
    pub fn from_state(state: &DecoderState) -> Self {
        let n = state.n();
        let mut x = vec![0.0; n * 2];
        for (rank, &item) in state.placed().iter().enumerate() {
            x[item * 2] = 1.0;
            x[item * 2 + 1] = (rank + 1) as f64 / n as f64;
        }
        Self { n, x }
    }

    pub fn row(&self, i: usize) -> [f64; 2] {
        [self.x[2 * i], self.x[2 * i + 1]]
    }
}

/// Node features of `state` and max-abs normalized edge features of `inst`.
pub fn featurize(inst: &LopInstance, state: &DecoderState) -> Result<(NodeStateFeatures, EdgeFeatures)> {
    if state.n() != inst.n() {
        return Err(ModelError::State(format!(
            "state has {} items but the instance has {}",
            state.n(),
            inst.n()
        )));
    }
    Ok((NodeStateFeatures::from_state(state), edge_features(inst).normalized()))
}
