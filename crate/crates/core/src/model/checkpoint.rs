//! Binary checkpoint container.
//!
//! Layout, all integers little-endian `u32` unless noted:
//!
//! ```text
//! magic "RADNMTCK" (8 bytes) | version | setting (u8)
//! emb | hidden | word vocab | char vocab | radical vocab | target vocab
//! tensor count
//! per tensor: name length | name (UTF-8) | rank | shape... | f32 data, row-major
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{ModelDims, ModelParams};
use crate::composition::CompositionSetting;
use crate::error::{Error, Result};
use crate::real::Real;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RADNMTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

/// Serializes `params` to bytes. Values are stored as `f32`.
pub fn checkpoint_bytes<T: Real>(params: &ModelParams<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * params.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION as usize);
    out.push(params.setting.code());
    let d = params.dims;
    for v in [d.emb, d.hidden, d.word_vocab, d.char_vocab, d.radical_vocab, d.target_vocab] {
        put_u32(&mut out, v);
    }
    let tensors = params.tensors();
    put_u32(&mut out, tensors.len());
    for (name, t) in tensors {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.ndim());
        for &s in t.shape() {
            put_u32(&mut out, s);
        }
        for v in t.iter() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

pub fn write_checkpoint<T: Real>(params: &ModelParams<T>, mut out: impl Write) -> Result<()> {
    out.write_all(&checkpoint_bytes(params))
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn save_checkpoint<T: Real>(params: &ModelParams<T>, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &checkpoint_bytes(params))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<ModelParams<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes)
}

pub fn read_checkpoint<T: Real>(mut input: impl Read) -> Result<ModelParams<T>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    parse_checkpoint(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn parse_checkpoint<T: Real>(bytes: &[u8]) -> Result<ModelParams<T>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let code = c.take(1)?[0];
    let setting = CompositionSetting::from_code(code)
        .ok_or_else(|| Error::Checkpoint(format!("unknown setting code {code}")))?;
    let dims = ModelDims {
        emb: c.u32()?,
        hidden: c.u32()?,
        word_vocab: c.u32()?,
        char_vocab: c.u32()?,
        radical_vocab: c.u32()?,
        target_vocab: c.u32()?,
    };
    let mut params = ModelParams::<T>::zeros(setting, dims);
    let count = c.u32()?;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            slots.len()
        )));
    }
    for (want_name, slot) in slots.iter_mut() {
        let len = c.u32()?;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != want_name {
            return Err(Error::Checkpoint(format!("expected tensor {want_name}, found {name}")));
        }
        let rank = c.u32()?;
        let shape = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        if shape != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: shape {shape:?} does not match {:?}",
                slot.shape()
            )));
        }
        let data = c.take(4 * slot.len())?;
        for (v, chunk) in slot.iter_mut().zip(data.chunks_exact(4)) {
            let f = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            *v = T::lit(f as f64);
        }
    }
    drop(slots);
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(params)
}
