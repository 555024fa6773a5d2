//! Named weight tensors and their binary container.
//!
//! Container layout, all integers little-endian:
//!
//! ```text
//! magic    b"KWSW"
//! version  u32 = 1
//! count    u32
//! count × { path_len u32, path utf-8, kind u8 (0 param, 1 buffer),
//!           ndim u32, dims u32 × ndim, offset u64 }
//! data     f32 × Σ numel, tensor i starting at byte `offset` of this section
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::accounting::{tensor_specs, ParamConventions, TensorKind, TensorSpec};
use super::arch::Architecture;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KWSW";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub kind: TensorKind,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Weight tensors addressed by their canonical layer path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightSet {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor) -> Result<()> {
        if tensor.data.len() != tensor.numel() {
            return Err(Error::Shape(format!(
                "tensor with shape {:?} holds {} values",
                tensor.shape,
                tensor.data.len()
            )));
        }
        self.tensors.insert(path.into(), tensor);
        Ok(())
    }

    pub fn get(&self, path: &str) -> Result<&Tensor> {
        self.tensors
            .get(path)
            .ok_or_else(|| Error::Weights(format!("missing tensor {path}")))
    }

    pub fn get_mut(&mut self, path: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(path)
            .ok_or_else(|| Error::Weights(format!("missing tensor {path}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Element count of trainable tensors.
    pub fn param_count(&self) -> u64 {
        self.tensors
            .values()
            .filter(|t| t.kind == TensorKind::Param)
            .map(|t| t.numel() as u64)
            .sum()
    }

    /// Checks that every tensor the architecture needs is present with the
    /// expected shape, and nothing else is.
    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let specs = tensor_specs(arch, &ParamConventions::default());
        for spec in &specs {
            let t = self.get(&spec.path)?;
            if t.shape != spec.shape {
                return Err(Error::Shape(format!(
                    "{}: expected {:?}, found {:?}",
                    spec.path, spec.shape, t.shape
                )));
            }
        }
        if self.tensors.len() != specs.len() {
            let extra = self
                .tensors
                .keys()
                .find(|k| !specs.iter().any(|s| &s.path == *k))
                .cloned()
                .unwrap_or_default();
            return Err(Error::Weights(format!("unexpected tensor {extra}")));
        }
        Ok(())
    }

    /// Deterministic pseudo-random weights for testing and smoke runs.
    ///
    /// Conv and linear weights are uniform with variance `1/fan_in`;
    /// batch-norm scale, variance near 1 and shift, mean near 0.
    pub fn init_seeded(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ws = Self::new();
        for spec in tensor_specs(arch, &ParamConventions::default()) {
            let data = init_tensor(&spec, &mut rng);
            ws.tensors.insert(
                spec.path.clone(),
                Tensor {
                    shape: spec.shape,
                    kind: spec.kind,
                    data,
                },
            );
        }
        ws
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Vec::new();
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        let mut data = Vec::new();
        for (path, t) in &self.tensors {
            header.extend_from_slice(&(path.len() as u32).to_le_bytes());
            header.extend_from_slice(path.as_bytes());
            header.push(match t.kind {
                TensorKind::Param => 0,
                TensorKind::Buffer => 1,
            });
            header.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                header.extend_from_slice(&(d as u32).to_le_bytes());
            }
            header.extend_from_slice(&(data.len() as u64).to_le_bytes());
            for v in &t.data {
                data.extend_from_slice(&v.to_le_bytes());
            }
        }
        header.extend_from_slice(&data);
        header
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Weights("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Weights(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let path = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Weights("tensor path is not UTF-8".into()))?
                .to_owned();
            let kind = match r.take(1)?[0] {
                0 => TensorKind::Param,
                1 => TensorKind::Buffer,
                k => return Err(Error::Weights(format!("{path}: unknown kind {k}"))),
            };
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let offset = r.u64()? as usize;
            entries.push((path, kind, shape, offset));
        }
        let data = &bytes[r.pos..];
        let mut ws = Self::new();
        for (path, kind, shape, offset) in entries {
            let n: usize = shape.iter().product();
            let chunk = data
                .get(offset..offset + 4 * n)
                .ok_or_else(|| Error::Weights(format!("{path}: data out of bounds")))?;
            let values = chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            ws.insert(path, Tensor { shape, kind, data: values })?;
        }
        Ok(ws)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn init_tensor(spec: &TensorSpec, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = spec.numel();
    let p = spec.path.as_str();
    let mut uniform = |lo: f32, hi: f32| (0..n).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    if p.ends_with("bn.weight") || p.ends_with("running_var") {
        uniform(0.5, 1.5)
    } else if p.ends_with("bn.bias") || p.ends_with("running_mean") {
        uniform(-0.1, 0.1)
    } else if p.ends_with(".bias") {
        vec![0.0; n]
    } else {
        // weight: fan-in is everything but the leading output dimension
        let fan_in: usize = spec.shape[1..].iter().product();
        let a = (3.0 / fan_in.max(1) as f32).sqrt();
        uniform(-a, a)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Weights("truncated header".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::accounting::count_params;
    use crate::model::arch::build_a0;

    #[test]
    fn seeded_init_matches_param_count() {
        let a = build_a0();
        let ws = WeightSet::init_seeded(&a, 1);
        ws.check(&a).unwrap();
        assert_eq!(ws.param_count(), count_params(&a));
        assert_eq!(ws, WeightSet::init_seeded(&a, 1));
        assert_ne!(ws, WeightSet::init_seeded(&a, 2));
    }

    #[test]
    fn container_round_trip() {
        let a = build_a0();
        let ws = WeightSet::init_seeded(&a, 3);
        let bytes = ws.to_bytes();
        assert_eq!(&bytes[..4], b"KWSW");
        let back = WeightSet::from_bytes(&bytes).unwrap();
        assert_eq!(back, ws);
        assert!(WeightSet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(WeightSet::from_bytes(b"NOPE").is_err());
    }

    #[test]
    fn check_reports_missing_and_misshapen() {
        let a = build_a0();
        let mut ws = WeightSet::init_seeded(&a, 0);
        ws.tensors.remove("classifier.bias");
        assert!(matches!(ws.check(&a), Err(Error::Weights(_))));
        let mut ws = WeightSet::init_seeded(&a, 0);
        ws.get_mut("classifier.bias").unwrap().shape = vec![19];
        assert!(matches!(ws.check(&a), Err(Error::Shape(_))));
    }
}
