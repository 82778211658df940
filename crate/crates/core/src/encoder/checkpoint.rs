//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ULRM"                      magic
//! u32                         format version
//! u32 x 6, f32, u64           vocab_size d_model n_heads n_layers d_ff max_len, dropout, seed
//! u32                         tensor count
//! per tensor:
//!   u32 + bytes               name (UTF-8)
//!   u32 + u32 x rank          rank, dims
//!   u64                       byte offset into the payload
//! payload                     row-major IEEE-754 binary32 values
//! ```

use std::fs;
use std::path::Path;

use super::params::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ULRM";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &EncoderParams<f32>, config: &EncoderConfig) -> Vec<u8> {
    let tensors = params.named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [config.vocab_size, config.d_model, config.n_heads, config.n_layers, config.d_ff, config.max_len] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&config.dropout.to_le_bytes());
    out.extend_from_slice(&config.seed.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &dim in &t.shape {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        out.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * t.len() as u64;
    }
    for (_, t) in &tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(EncoderConfig, EncoderParams<f32>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    r.take(4)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
    }
    let mut dims = [0usize; 6];
    for d in dims.iter_mut() {
        *d = r.u32()? as usize;
    }
    let config = EncoderConfig {
        vocab_size: dims[0],
        d_model: dims[1],
        n_heads: dims[2],
        n_layers: dims[3],
        d_ff: dims[4],
        max_len: dims[5],
        dropout: r.f32()?,
        seed: r.u64()?,
    };
    config.validate().map_err(|e| Error::Checkpoint(format!("bad config block: {e}")))?;

    let mut params = EncoderParams::<f32>::zeros(&config);
    let count = r.u32()? as usize;
    let mut directory = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let offset = r.u64()? as usize;
        directory.push((name, shape, offset));
    }
    let payload = &bytes[r.pos..];

    let mut targets = params.named_tensors_mut();
    if targets.len() != directory.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for this config, found {}",
            targets.len(),
            directory.len()
        )));
    }
    for ((name, shape, offset), (want_name, t)) in directory.iter().zip(targets.iter_mut()) {
        if name != want_name {
            return Err(Error::Checkpoint(format!("expected tensor {want_name}, found {name}")));
        }
        if *shape != t.shape {
            return Err(Error::Checkpoint(format!("shape mismatch for {name}: {shape:?} vs {:?}", t.shape)));
        }
        let n_bytes = 4 * t.len();
        let raw = payload
            .get(*offset..offset + n_bytes)
            .ok_or_else(|| Error::Checkpoint(format!("truncated payload for {name}")))?;
        for (dst, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    drop(targets);
    if let Some(name) = params.first_non_finite() {
        return Err(Error::NonFinite(name));
    }
    Ok((config, params))
}

pub fn save_checkpoint(params: &EncoderParams<f32>, config: &EncoderConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params, config)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(EncoderConfig, EncoderParams<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
