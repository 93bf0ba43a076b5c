//! Binary parameter archive.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "SWSEG1"
//! header_len, header (JSON-encoded SwinConfig)
//! count
//! count × { name_len, name (UTF-8), ndim, dims[ndim], f32 LE × product(dims) }
//! ```
//!
//! Entries are written in name order, so equal parameters give identical files.

use std::io::{Read, Write};
use std::path::Path;

use super::{ModelError, ModelParams, SwinConfig, SwinSegmenter};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"SWSEG1";

pub fn encode(config: &SwinConfig, params: &ModelParams<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * params.num_scalars());
    out.extend_from_slice(MAGIC);
    let header = serde_json::to_vec(config).expect("config serializes");
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() < n {
            return Err(ModelError::Checkpoint("truncated archive".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<usize, ModelError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
}

/// Parses an archive and checks the parameters against the embedded config.
pub fn decode(bytes: &[u8]) -> Result<SwinSegmenter<f32>, ModelError> {
    let mut r = Reader { buf: bytes };
    if r.take(MAGIC.len()).ok() != Some(MAGIC.as_slice()) {
        return Err(ModelError::Checkpoint("missing SWSEG1 magic".into()));
    }
    let hlen = r.u32()?;
    let config: SwinConfig = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;
    let count = r.u32()?;
    let mut params = ModelParams::new();
    for _ in 0..count {
        let nlen = r.u32()?;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| ModelError::Checkpoint("parameter name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(4).ok_or_else(|| ModelError::Checkpoint("oversized tensor".into()))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| ModelError::Checkpoint(format!("{name}: {e}")))?;
        if params.contains(&name) {
            return Err(ModelError::Checkpoint(format!("duplicate parameter `{name}`")));
        }
        params.insert(name, t);
    }
    if !r.buf.is_empty() {
        return Err(ModelError::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }
    SwinSegmenter::new(config, params)
}

pub fn save(model: &SwinSegmenter<f32>, path: &Path) -> Result<(), ModelError> {
    let io = |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&encode(model.config(), model.params())).map_err(io)
}

pub fn load(path: &Path) -> Result<SwinSegmenter<f32>, ModelError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let cfg = SwinConfig::tiny();
        let model = SwinSegmenter::new(cfg.clone(), ModelParams::random(&cfg, 3, 0.5).unwrap()).unwrap();
        let bytes = encode(model.config(), model.params());
        let back = decode(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(encode(back.config(), back.params()), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let cfg = SwinConfig::tiny();
        let p = ModelParams::init(&cfg, 0).unwrap();
        let bytes = encode(&cfg, &p);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
