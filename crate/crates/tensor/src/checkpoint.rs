use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::batchnorm::BatchNormState;
use crate::error::{Result, TensorError};
use crate::param::ParamStore;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"LOPCKPT1";

/// One named `f32` array.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// Named tensors plus free-form JSON metadata and integer counters.
///
/// On disk: the 8-byte magic, a little-endian `u32` version, a `u64` header
/// length, the JSON header, then all tensor data as little-endian `f32`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub counters: BTreeMap<String, u64>,
    tensors: Vec<CheckpointTensor>,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    counters: BTreeMap<String, u64>,
    tensors: Vec<IndexEntry>,
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Checkpoint(msg.into()))
}

const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";
const STEP_PREFIX: &str = "adam.step/";

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            counters: BTreeMap::new(),
            tensors: Vec::new(),
        }
    }

    pub fn tensors(&self) -> &[CheckpointTensor] {
        &self.tensors
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return bad(format!("tensor `{name}`: shape {shape:?} does not match {} values", data.len()));
        }
        if self.get(&name).is_some() {
            return bad(format!("duplicate tensor `{name}`"));
        }
        self.tensors.push(CheckpointTensor {
            name,
            shape: shape.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CheckpointTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn require(&self, name: &str, shape: &[usize]) -> Result<&CheckpointTensor> {
        match self.get(name) {
            None => bad(format!("missing tensor `{name}`")),
            Some(t) if t.shape != shape => bad(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                t.shape
            )),
            Some(t) => Ok(t),
        }
    }

    /// Stores parameter values and, optionally, Adam moments and steps.
    pub fn put_params<T: Scalar>(&mut self, store: &ParamStore<T>, optimizer: bool) -> Result<()> {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<f32>>();
        for p in store.iter() {
            self.push(p.name.clone(), p.value.shape(), f(p.value.data()))?;
            if optimizer {
                self.push(format!("{M_PREFIX}{}", p.name), p.value.shape(), f(&p.first_moment))?;
                self.push(format!("{V_PREFIX}{}", p.name), p.value.shape(), f(&p.second_moment))?;
                self.counters.insert(format!("{STEP_PREFIX}{}", p.name), p.step);
            }
        }
        Ok(())
    }

    /// Restores every parameter of `store` by name; optimizer state is
    /// restored when present and reset otherwise. Gradients are zeroed.
    pub fn load_params<T: Scalar>(&self, store: &mut ParamStore<T>) -> Result<()> {
        let conv = |v: &[f32]| v.iter().map(|&x| T::lit(x as f64)).collect::<Vec<T>>();
        for p in store.iter_mut() {
            let shape = p.value.shape().to_vec();
            let t = self.require(&p.name, &shape)?;
            p.value.data_mut().copy_from_slice(&conv(&t.data));
            match self.get(&format!("{M_PREFIX}{}", p.name)) {
                Some(_) => {
                    p.first_moment = conv(&self.require(&format!("{M_PREFIX}{}", p.name), &shape)?.data);
                    p.second_moment = conv(&self.require(&format!("{V_PREFIX}{}", p.name), &shape)?.data);
                    p.step = self.counters.get(&format!("{STEP_PREFIX}{}", p.name)).copied().unwrap_or(0);
                }
                None => {
                    p.first_moment.iter_mut().for_each(|v| *v = T::zero());
                    p.second_moment.iter_mut().for_each(|v| *v = T::zero());
                    p.step = 0;
                }
            }
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
        Ok(())
    }

    pub fn put_batch_norm<T: Scalar>(&mut self, name: &str, state: &BatchNormState<T>) -> Result<()> {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<f32>>();
        let d = state.dim();
        self.push(format!("{name}.running_mean"), &[d], f(&state.running_mean))?;
        self.push(format!("{name}.running_var"), &[d], f(&state.running_var))
    }

    pub fn load_batch_norm<T: Scalar>(&self, name: &str, state: &mut BatchNormState<T>) -> Result<()> {
        let d = state.dim();
        let mean = self.require(&format!("{name}.running_mean"), &[d])?;
        let var = self.require(&format!("{name}.running_var"), &[d])?;
        state.running_mean = mean.data.iter().map(|&x| T::lit(x as f64)).collect();
        state.running_var = var.data.iter().map(|&x| T::lit(x as f64)).collect();
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let index = self
            .tensors
            .iter()
            .map(|t| {
                let e = IndexEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                };
                offset += t.data.len();
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            meta: self.meta.clone(),
            counters: self.counters.clone(),
            tensors: index,
        })
        .map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + header.len() + offset * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return bad("not a checkpoint file (bad magic or truncated preamble)");
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return bad(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            ));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return bad("truncated checkpoint header");
        }
        let header: Header = serde_json::from_slice(&body[..hlen])
            .map_err(|e| TensorError::Checkpoint(format!("corrupt header: {e}")))?;
        let blob = &body[hlen..];
        let total: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if blob.len() != total * 4 {
            return bad(format!(
                "checkpoint data holds {} bytes, header describes {}",
                blob.len(),
                total * 4
            ));
        }
        let mut ck = Checkpoint::new(header.meta);
        ck.counters = header.counters;
        for e in header.tensors {
            let len: usize = e.shape.iter().product();
            let Some(raw) = blob.get(e.offset * 4..(e.offset + len) * 4) else {
                return bad(format!("tensor `{}` lies outside the data section", e.name));
            };
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ck.push(e.name, &e.shape, data)?;
        }
        Ok(ck)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
