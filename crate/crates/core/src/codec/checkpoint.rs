//! Checkpoint container: `LSECKPT1`, a little-endian `u64` header length, a
//! JSON header, then every parameter as little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LSECKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the payload.
    pub offset: usize,
    /// Number of `f32` values.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParamStore,
}

impl Checkpoint {
    /// Parameters whose names start with `prefix`.
    pub fn namespace(&self, prefix: &str) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, t) in self.params.iter().filter(|(n, _)| n.starts_with(prefix)) {
            out.add(name, t.detached());
        }
        out
    }

    pub fn config_section<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self.header.config.get(key).ok_or_else(|| Error::Checkpoint(format!("header has no `{key}` config")))?;
        Ok(serde_json::from_value(v.clone())?)
    }
}

/// Serializes `config` and all `stores` in order. Values are narrowed to `f32`.
pub fn encode_checkpoint(config: &serde_json::Value, stores: &[&ParamStore]) -> Result<Vec<u8>> {
    let mut params = Vec::new();
    let mut payload = Vec::new();
    for store in stores {
        for (name, t) in store.iter() {
            if params.iter().any(|p: &ParamEntry| p.name == name) {
                return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
            }
            params.push(ParamEntry { name: name.to_string(), shape: t.shape().to_vec(), offset: payload.len(), len: t.len() });
            for &v in t.data() {
                payload.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    let header = serde_json::to_vec(&CheckpointHeader { format_version: FORMAT_VERSION, config: config.clone(), params })?;
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if hlen > body.len() {
        return Err(bad("truncated header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&body[..hlen])?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {}", header.format_version)));
    }
    let payload = &body[hlen..];
    let mut params = ParamStore::new();
    let mut expected = 0;
    for e in &header.params {
        if e.offset != expected || e.len != e.shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!("inconsistent manifest entry for {}", e.name)));
        }
        let end = e.offset + 4 * e.len;
        let raw = payload.get(e.offset..end).ok_or_else(|| Error::Checkpoint(format!("payload truncated in {}", e.name)))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        params.add(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
        expected = end;
    }
    if expected != payload.len() {
        return Err(bad("trailing bytes after payload"));
    }
    Ok(Checkpoint { header, params })
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &serde_json::Value, stores: &[&ParamStore]) -> Result<()> {
    let bytes = encode_checkpoint(config, stores)?;
    crate::io::write_bytes_atomic(path.as_ref(), &bytes)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}
