//! Dataset directories: `manifest.json` plus one LOLIB file per instance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::{generate, GeneratorSpec};
use super::lolib::{read_lolib_file, write_lolib_file};
use crate::error::{LopError, Result};
use crate::instance::LopInstance;
use crate::rng::RNG_ALGORITHM;

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";

/// Generator provenance shared by every instance of a generated dataset.
pub type GeneratorRecord = GeneratorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub name: String,
    pub file: String,
    /// Index within the generator family, when generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_known: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub generator: Option<GeneratorRecord>,
    pub seed: Option<u64>,
    pub count: usize,
    pub names: Vec<String>,
    pub rng: String,
    pub records: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<LopInstance>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Dataset of externally sourced instances (no generator provenance).
    pub fn from_instances(instances: Vec<LopInstance>) -> Self {
        let records = instances
            .iter()
            .enumerate()
            .map(|(k, inst)| InstanceRecord {
                name: inst.name().to_string(),
                file: format!("inst-{k:05}.lop"),
                index: None,
                best_known: inst.best_known(),
            })
            .collect();
        Self::with_records(instances, None, records)
    }

    /// The first `count` instances of a generator family.
    pub fn generated(spec: &GeneratorSpec, sources: &[LopInstance], count: usize) -> Result<Self> {
        let instances = (0..count as u64)
            .map(|k| generate(spec, sources, k))
            .collect::<Result<Vec<_>>>()?;
        let records = instances
            .iter()
            .enumerate()
            .map(|(k, inst)| InstanceRecord {
                name: inst.name().to_string(),
                file: format!("inst-{k:05}.lop"),
                index: Some(k as u64),
                best_known: None,
            })
            .collect();
        Ok(Self::with_records(instances, Some(spec.clone()), records))
    }

    fn with_records(
        instances: Vec<LopInstance>,
        generator: Option<GeneratorSpec>,
        records: Vec<InstanceRecord>,
    ) -> Self {
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            seed: generator.as_ref().map(|g| g.seed),
            generator,
            count: instances.len(),
            names: instances.iter().map(|i| i.name().to_string()).collect(),
            rng: RNG_ALGORITHM.to_string(),
            records,
        };
        Self { instances, manifest }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Regenerates every recorded instance from the manifest provenance and
    /// returns the positions that do not match the stored matrices.
    pub fn regeneration_mismatches(&self, sources: &[LopInstance]) -> Result<Vec<usize>> {
        let spec = self.manifest.generator.as_ref().ok_or_else(|| {
            LopError::Dataset("dataset has no generator provenance".into())
        })?;
        let mut bad = Vec::new();
        for (k, (rec, inst)) in self.manifest.records.iter().zip(&self.instances).enumerate() {
            let index = rec.index.ok_or_else(|| {
                LopError::Dataset(format!("record {k} (`{}`) has no generator index", rec.name))
            })?;
            if generate(spec, sources, index)?.matrix() != inst.matrix() {
                bad.push(k);
            }
        }
        Ok(bad)
    }
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (inst, rec) in ds.instances.iter().zip(&ds.manifest.records) {
        write_lolib_file(inst, &dir.join(&rec.file))?;
    }
    let json = serde_json::to_string_pretty(&ds.manifest)
        .map_err(|e| LopError::Dataset(format!("cannot serialize manifest: {e}")))?;
    std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| LopError::Dataset(format!("corrupt manifest: {e}")))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(LopError::Dataset(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    if manifest.count != manifest.records.len() || manifest.count != manifest.names.len() {
        return Err(LopError::Dataset(format!(
            "manifest count {} disagrees with {} records / {} names",
            manifest.count,
            manifest.records.len(),
            manifest.names.len()
        )));
    }
    let mut instances = Vec::with_capacity(manifest.count);
    for (k, rec) in manifest.records.iter().enumerate() {
        if manifest.names[k] != rec.name {
            return Err(LopError::Dataset(format!(
                "record {k} (`{}`) does not match name `{}`",
                rec.name, manifest.names[k]
            )));
        }
        let inst = read_lolib_file(&dir.join(&rec.file)).map_err(|e| {
            LopError::Dataset(format!("record {k} (`{}`, file {}): {e}", rec.name, rec.file))
        })?;
        instances.push(inst.with_name(rec.name.clone()).with_best_known(rec.best_known));
    }
    Ok(Dataset { instances, manifest })
}
