//! Named f32 tensors and the `GAIACKPT` file format.
//!
//! Layout (little-endian): `GAIACKPT`, version `u32`, tensor count `u32`,
//! then per tensor a `u16`-prefixed UTF-8 name, rank `u8`, `u64` dims and
//! the row-major f32 data.

use std::io::Write;
use std::path::Path;

use super::SupernetError;

pub const MAGIC: &[u8; 8] = b"GAIACKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self, SupernetError> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(SupernetError::ShapeMismatch(format!(
                "{name}: shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(tensors: Vec<Tensor>) -> Result<Self, SupernetError> {
        let mut names = std::collections::HashSet::new();
        for t in &tensors {
            if !names.insert(t.name.as_str()) {
                return Err(SupernetError::BadCheckpoint(format!("duplicate tensor {}", t.name)));
            }
        }
        Ok(Self { tensors })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, SupernetError> {
        self.get(name).ok_or_else(|| SupernetError::MissingTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SupernetError> {
        let bad = |m: &str| SupernetError::BadCheckpoint(m.to_string());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], SupernetError> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated"))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err(bad("missing GAIACKPT magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let n = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
            let name = String::from_utf8(take(n)?.to_vec()).map_err(|_| bad("name is not UTF-8"))?;
            let rank = take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize);
            }
            let len: usize = shape.iter().product();
            let raw = take(len.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        if take(1).is_ok() {
            return Err(bad("trailing bytes"));
        }
        Self::new(tensors)
    }

    pub fn save(&self, path: &Path) -> Result<(), SupernetError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SupernetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
