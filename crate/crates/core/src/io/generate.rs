use serde::{Deserialize, Serialize};

use crate::error::{LopError, Result};
use crate::instance::LopInstance;
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Off-diagonal weights i.i.d. uniform on `[0, 1)`.
    Uniform,
    /// Off-diagonal weights resampled from a source instance.
    Subsample,
}

/// Describes a family of generated instances. Instance `k` of the family is
/// a pure function of `(kind, n, seed, k)` and, for subsampling, the source
/// pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    /// Label of the source pool (file or directory) for subsampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl GeneratorSpec {
    pub fn uniform(n: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Uniform,
            n,
            seed,
            source: None,
        }
    }

    pub fn subsample(n: usize, seed: u64, source: impl Into<String>) -> Self {
        Self {
            kind: GeneratorKind::Subsample,
            n,
            seed,
            source: Some(source.into()),
        }
    }

    pub fn validate(&self, sources: &[LopInstance]) -> Result<()> {
        if self.n < 2 {
            return Err(LopError::InvalidArgument(format!(
                "generator size must be at least 2, got {}",
                self.n
            )));
        }
        if self.kind == GeneratorKind::Subsample && sources.is_empty() {
            return Err(LopError::InvalidArgument(
                "subsample generator requires at least one source instance".into(),
            ));
        }
        Ok(())
    }
}

/// Instance `index` of the family described by `spec`.
///
/// For subsampling, the source is picked uniformly from `sources` with the
/// instance's own stream, then its weights are resampled.
pub fn generate(spec: &GeneratorSpec, sources: &[LopInstance], index: u64) -> Result<LopInstance> {
    spec.validate(sources)?;
    let seed = derive_seed(spec.seed, index);
    let inst = match spec.kind {
        GeneratorKind::Uniform => gen_uniform(spec.n, seed)?,
        GeneratorKind::Subsample => {
            let pick = Rng::new(seed).index(sources.len());
            gen_subsample(&sources[pick], spec.n, derive_seed(seed, 1))?
        }
    };
    let name = match spec.kind {
        GeneratorKind::Uniform => format!("uniform-n{}-s{}-{index}", spec.n, spec.seed),
        GeneratorKind::Subsample => format!("subsample-n{}-s{}-{index}", spec.n, spec.seed),
    };
    Ok(inst.with_name(name))
}

/// Uniform instance: off-diagonal entries drawn in row-major order from
/// the stream seeded with `seed`.
pub fn gen_uniform(n: usize, seed: u64) -> Result<LopInstance> {
    if n < 2 {
        return Err(LopError::InvalidArgument(format!(
            "instance size must be at least 2, got {n}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                b[i * n + j] = rng.uniform_f64();
            }
        }
    }
    LopInstance::new(format!("uniform-n{n}-s{seed}"), n, b)
}

/// Size-`m` instance whose off-diagonal entries are drawn with replacement
/// from the off-diagonal entries of `source`.
pub fn gen_subsample(source: &LopInstance, m: usize, seed: u64) -> Result<LopInstance> {
    if m < 2 {
        return Err(LopError::InvalidArgument(format!(
            "instance size must be at least 2, got {m}"
        )));
    }
    let pool: Vec<f64> = source.off_diagonal().collect();
    let mut rng = Rng::new(seed);
    let mut b = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                b[i * m + j] = pool[rng.index(pool.len())];
            }
        }
    }
    LopInstance::new(format!("{}-sub{m}-s{seed}", source.name()), m, b)
}
