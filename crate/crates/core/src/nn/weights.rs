//! Binary weight file.
//!
//! All integers are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  "EVFUSEW\0"
//! 8       4     version (u32, currently 1)
//! 12      4     entry count (u32)
//! then per entry:
//!         4     name length in bytes (u32, 1..=1024)
//!         n     name, UTF-8
//!         4     rank (u32, 0..=8)
//!         4*r   dims (u32 each)
//!         4*N   values, IEEE-754 binary32, N = product of dims
//! ```
//!
//! Names are unique; values must be finite; trailing bytes are rejected.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"EVFUSEW\0";
pub const VERSION: u32 = 1;
const MAX_NAME: usize = 1024;
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeightFileError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u32),
    #[error("truncated at byte {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("entry {index}: {msg}")]
    Entry { index: usize, msg: String },
    #[error("{0} trailing bytes after last entry")]
    TrailingBytes(usize),
    #[error("missing parameter {0:?}")]
    Missing(String),
    #[error("parameter {name:?}: shape {got:?}, expected {expected:?}")]
    Shape { name: String, expected: Vec<usize>, got: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFile {
    pub entries: Vec<WeightEntry>,
}

impl WeightFile {
    pub fn push<T: Scalar>(&mut self, name: impl Into<String>, t: &Tensor<T>) {
        self.entries.push(WeightEntry {
            name: name.into(),
            shape: t.shape().to_vec(),
            values: t.data().iter().map(|v| v.f64() as f32).collect(),
        });
    }

    pub fn get(&self, name: &str) -> Option<&WeightEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Load `name` as a tensor, checking its shape.
    pub fn tensor<T: Scalar>(&self, name: &str, expected: &[usize]) -> Result<Tensor<T>, WeightFileError> {
        let e = self.get(name).ok_or_else(|| WeightFileError::Missing(name.to_string()))?;
        if e.shape != expected {
            return Err(WeightFileError::Shape { name: name.into(), expected: expected.to_vec(), got: e.shape.clone() });
        }
        Ok(Tensor::new(e.shape.clone(), e.values.iter().map(|&v| T::of(v as f64)).collect())
            .expect("validated on parse"))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(WeightFileError::Truncated { offset: self.pos, what })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WeightFileError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn parse_weight_file(bytes: &[u8]) -> Result<WeightFile, WeightFileError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic").map_err(|_| WeightFileError::BadMagic)? != MAGIC {
        return Err(WeightFileError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(WeightFileError::Version(version));
    }
    let count = r.u32("entry count")? as usize;
    let mut entries: Vec<WeightEntry> = Vec::new();
    for index in 0..count {
        let err = |msg: String| WeightFileError::Entry { index, msg };
        let name_len = r.u32("name length")? as usize;
        if name_len == 0 || name_len > MAX_NAME {
            return Err(err(format!("name length {name_len} outside 1..={MAX_NAME}")));
        }
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| err("name is not UTF-8".into()))?
            .to_string();
        if entries.iter().any(|e| e.name == name) {
            return Err(err(format!("duplicate name {name:?}")));
        }
        let rank = r.u32("rank")? as usize;
        if rank > MAX_RANK {
            return Err(err(format!("rank {rank} exceeds {MAX_RANK}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
            .ok_or(WeightFileError::Truncated { offset: r.pos, what: "values" })?;
        let raw = r.take(n * 4, "values")?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(err(format!("non-finite value at position {i}")));
        }
        entries.push(WeightEntry { name, shape, values });
    }
    if r.remaining() > 0 {
        return Err(WeightFileError::TrailingBytes(r.remaining()));
    }
    Ok(WeightFile { entries })
}

pub fn serialize_weight_file(file: &WeightFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(file.entries.len() as u32).to_le_bytes());
    for e in &file.entries {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for &d in &e.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &e.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
