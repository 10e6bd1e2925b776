//! Binary checkpoint: `VWPCKPT1`, a u64-length-prefixed canonical config
//! block, then until end of file one record per parameter:
//! u32 name length, name bytes, u32 rank, u64 extents, f64 payload.
//! All integers and floats are little-endian.

use std::path::Path;

use super::config::ModelConfig;
use super::{parameter_shapes, StoryGenModel};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"VWPCKPT1";

const MAX_NAME_LEN: usize = 4096;
const MAX_RANK: usize = 8;

pub fn encode_checkpoint(model: &StoryGenModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.params.num_values() * 8);
    out.extend_from_slice(MAGIC);
    let cfg = model.config.to_canonical();
    out.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    for (name, t) in model.params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for v in t.data() {
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
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Data(format!(
                "checkpoint truncated in {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes a checkpoint and checks that its parameters are exactly the
/// ones its configuration calls for.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<StoryGenModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Data("not a checkpoint: bad magic".into()));
    }
    let cfg_len = r.u64("config length")?;
    if cfg_len > r.remaining() as u64 {
        return Err(Error::Data(format!(
            "config block of {cfg_len} bytes exceeds file"
        )));
    }
    let cfg_bytes = r.take(cfg_len as usize, "config")?;
    let cfg_text = std::str::from_utf8(cfg_bytes)
        .map_err(|_| Error::Data("config block is not UTF-8".into()))?;
    let config =
        ModelConfig::from_canonical(cfg_text).map_err(|e| e.context("checkpoint config"))?;

    let mut params = ParamStore::new();
    while r.remaining() > 0 {
        let name_len = r.u32("name length")?;
        if name_len == 0 || name_len > MAX_NAME_LEN {
            return Err(Error::Data(format!("bad parameter name length {name_len}")));
        }
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Data("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Data(format!("{name}: bad rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: u64 = 1;
        for _ in 0..rank {
            let e = r.u64("extent")?;
            count = count
                .checked_mul(e)
                .filter(|c| c.saturating_mul(8) <= r.remaining() as u64)
                .ok_or_else(|| Error::Data(format!("{name}: payload larger than file")))?;
            shape.push(e as usize);
        }
        let payload = r.take(count as usize * 8, "payload")?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if params.contains(&name) {
            return Err(Error::Data(format!("duplicate parameter {name}")));
        }
        params.insert(name, Tensor::new(shape, data)?);
    }

    let expected = parameter_shapes(&config);
    let found: Vec<(String, Vec<usize>)> = params
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    if expected != found {
        let missing: Vec<&str> = expected
            .iter()
            .filter(|e| !found.contains(e))
            .map(|(n, _)| n.as_str())
            .collect();
        let extra: Vec<&str> = found
            .iter()
            .filter(|f| !expected.contains(f))
            .map(|(n, _)| n.as_str())
            .collect();
        return Err(Error::Data(format!(
            "checkpoint parameters do not match config: missing or misshapen {missing:?}, unexpected {extra:?}"
        )));
    }
    Ok(StoryGenModel { config, params })
}

pub fn save_checkpoint(model: &StoryGenModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<StoryGenModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_checkpoint(&bytes).map_err(|e| e.context(path.display().to_string()))
}
