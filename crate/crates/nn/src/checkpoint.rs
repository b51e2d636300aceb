//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"WPNNCKPT"  u32 version  u64 spec_len  spec (JSON)
//! u32 tensors  then per tensor: u64 len
//! f64 values of every tensor in the same order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};

const MAGIC: &[u8; 8] = b"WPNNCKPT";
const VERSION: u32 = 1;

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(model.spec())?;
    let params = model.params();
    let mut out = Vec::with_capacity(32 + spec.len() + 8 * model.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u64).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
    }
    for p in &params {
        for v in p.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let spec_len = c.u64()? as usize;
    let spec: ModelSpec = serde_json::from_slice(c.take(spec_len)?)?;
    let mut model = Model::new(spec)?;
    let count = c.u32()? as usize;
    let lens = (0..count).map(|_| c.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let expected: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    if lens != expected {
        return Err(Error::Checkpoint(format!("shape table {lens:?} does not match the spec {expected:?}")));
    }
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v = f64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"));
        }
    }
    if c.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - c.at)));
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
