//! NNCP checkpoint format (all integers little-endian):
//!
//! ```text
//! magic "NNCP" | version u32 | tensor count u32
//! per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 × rank | dtype u8 (0 = f32) | payload
//! ```

use std::fs;
use std::path::Path;

use super::ModelGraph;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NNCP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<Vec<u8>> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let count = u32::try_from(tensors.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for (name, t) in tensors {
        let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank()).map_err(|_| Error::Format(format!("rank too large for {name}")))?;
        buf.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension too large in {name}")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.push(DTYPE_F32);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("truncated checkpoint: need {n} bytes at offset {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::Format("bad magic: not an NNCP checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(Error::Format(format!("tensor {name}: unsupported dtype {dtype}")));
        }
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor::new(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after last tensor", bytes.len() - r.pos)));
    }
    Ok(out)
}

/// Writes every parameter and running statistic.
pub fn save_weights(model: &ModelGraph, path: &Path) -> Result<()> {
    let named = model.named_tensors();
    let bytes = encode_tensors(named.iter().map(|(n, t)| (n.as_str(), *t)))?;
    fs::write(path, bytes)?;
    Ok(())
}

/// What a load applied and what it left alone.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: Vec<String>,
    /// Model tensors left at their current values (missing or shape-mismatched in the file).
    pub kept: Vec<String>,
    /// File tensors with no counterpart in the model.
    pub unused: Vec<String>,
}

/// Restores tensors by name. In strict mode every model tensor must be
/// present with the same shape and the file may not carry extras. Non-strict
/// loads apply whatever matches by name and shape, which lets a checkpoint
/// with a different head size initialise the backbone of a new model.
/// The model is untouched when an error is returned.
pub fn load_weights(model: &mut ModelGraph, path: &Path, strict: bool) -> Result<LoadReport> {
    let bytes = fs::read(path)?;
    let file = decode_tensors(&bytes)?;
    let mut report = LoadReport::default();
    let mut mismatched = Vec::new();
    let mut missing = Vec::new();
    let mut plan = Vec::new();
    for (name, t) in model.named_tensors() {
        match file.iter().position(|(n, _)| *n == name) {
            Some(i) if file[i].1.shape() == t.shape() => plan.push((name, i)),
            Some(i) => {
                mismatched.push(format!("{name} (model {:?}, file {:?})", t.shape(), file[i].1.shape()));
                report.kept.push(name);
            }
            None => {
                missing.push(name.clone());
                report.kept.push(name);
            }
        }
    }
    let model_names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
    report.unused = file.iter().filter(|(n, _)| !model_names.contains(n)).map(|(n, _)| n.clone()).collect();
    if strict && !(mismatched.is_empty() && missing.is_empty() && report.unused.is_empty()) {
        let mut parts = Vec::new();
        if !mismatched.is_empty() {
            parts.push(format!("shape mismatch: {}", mismatched.join(", ")));
        }
        if !missing.is_empty() {
            parts.push(format!("missing: {}", missing.join(", ")));
        }
        if !report.unused.is_empty() {
            parts.push(format!("unexpected: {}", report.unused.join(", ")));
        }
        return Err(Error::Load(parts.join("; ")));
    }
    for (name, i) in plan {
        let dst = model.tensor_mut(&name).expect("planned tensor exists");
        *dst = file[i].1.clone();
        report.loaded.push(name);
    }
    Ok(report)
}
