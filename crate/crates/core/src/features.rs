use crate::instance::LopInstance;

/// Pairwise precedence features `y[i][j] = b[i][j] - b[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFeatures {
    n: usize,
    y: Vec<f64>,
}

impl EdgeFeatures {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.y[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.y[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn max_abs(&self) -> f64 {
        self.y.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Features divided by their largest magnitude, mapping them into
    /// `[-1, 1]`. An all-zero matrix is returned unchanged.
    pub fn normalized(&self) -> Self {
        let scale = self.max_abs();
        if scale == 0.0 {
            return self.clone();
        }
        Self {
            n: self.n,
            y: self.y.iter().map(|v| v / scale).collect(),
        }
    }
}

pub fn edge_features(inst: &LopInstance) -> EdgeFeatures {
    let n = inst.n();
    let mut y = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                y[i * n + j] = inst.weight(i, j) - inst.weight(j, i);
            }
        }
    }
    EdgeFeatures { n, y }
}
