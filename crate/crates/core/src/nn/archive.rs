//! Single-file checkpoint archive.
//!
//! ```text
//! <magic> '\n'
//! u64 LE  header length in bytes
//! header  UTF-8 JSON: {"meta": <any>, "tensors": [{"name", "shape", "offset", "len"}]}
//! payload little-endian f32 values; offsets and lengths count f32 elements
//! ```
//!
//! Tensors are written in name order, so the same contents always produce
//! the same bytes.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::nn::DEVICE;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug)]
pub struct Archive {
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

pub fn to_bytes(magic: &str, meta: &serde_json::Value, tensors: &[(String, Tensor)]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&(String, Tensor)> = tensors.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut entries = Vec::with_capacity(sorted.len());
    let mut payload = Vec::new();
    let mut offset = 0;
    for (name, t) in sorted {
        let values = t.flatten_all()?.to_dtype(candle_core::DType::F32)?.to_vec1::<f32>()?;
        entries.push(TensorEntry { name: name.clone(), shape: t.dims().to_vec(), offset, len: values.len() });
        offset += values.len();
        payload.extend(values.iter().flat_map(|v| v.to_le_bytes()));
    }
    let header = serde_json::to_vec(&Header { meta: meta.clone(), tensors: entries })?;
    let mut out = Vec::with_capacity(magic.len() + 9 + header.len() + payload.len());
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Reads the magic line of an archive without parsing the rest.
pub fn peek_magic(bytes: &[u8]) -> Option<&str> {
    let end = bytes.iter().take(32).position(|&b| b == b'\n')?;
    std::str::from_utf8(&bytes[..end]).ok()
}

pub fn from_bytes(magic: &str, bytes: &[u8]) -> Result<Archive> {
    match peek_magic(bytes) {
        Some(m) if m == magic => {}
        other => {
            return Err(Error::Checkpoint(format!("expected magic {magic:?}, found {other:?}")));
        }
    }
    let mut pos = magic.len() + 1;
    let header_len = bytes
        .get(pos..pos + 8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
        .ok_or_else(|| Error::Checkpoint("truncated header length".into()))?;
    pos += 8;
    let header: Header = serde_json::from_slice(
        bytes.get(pos..pos + header_len).ok_or_else(|| Error::Checkpoint("truncated header".into()))?,
    )?;
    pos += header_len;
    let payload = &bytes[pos..];
    let mut tensors = BTreeMap::new();
    for e in header.tensors {
        if e.shape.iter().product::<usize>() != e.len {
            return Err(Error::Checkpoint(format!("tensor {} shape/length mismatch", e.name)));
        }
        let raw = payload
            .get(e.offset * 4..(e.offset + e.len) * 4)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {} extends past payload", e.name)))?;
        let values: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        tensors.insert(e.name, Tensor::from_vec(values, e.shape, &DEVICE)?);
    }
    Ok(Archive { meta: header.meta, tensors })
}

pub fn write(path: &Path, magic: &str, meta: &serde_json::Value, tensors: &[(String, Tensor)]) -> Result<()> {
    std::fs::write(path, to_bytes(magic, meta, tensors)?).map_err(|e| Error::path(path, e))
}

pub fn read(path: &Path, magic: &str) -> Result<Archive> {
    let bytes = std::fs::read(path).map_err(|e| Error::path(path, e))?;
    from_bytes(magic, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let a = Tensor::new(&[[1.5f32, -0.0, f32::MIN_POSITIVE], [3.25, 1e-30, -7.0]], &DEVICE).unwrap();
        let b = Tensor::new(&[0.1f32], &DEVICE).unwrap();
        let meta = serde_json::json!({"epoch": 3});
        let bytes = to_bytes("TEST1", &meta, &[("b".into(), b), ("a".into(), a.clone())]).unwrap();
        let arc = from_bytes("TEST1", &bytes).unwrap();
        assert_eq!(arc.meta, meta);
        let got = arc.tensors["a"].flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let want = a.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(
            got.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            want.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(arc.tensors["a"].dims(), &[2, 3]);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let bytes = to_bytes("SEMGAN1", &serde_json::json!({}), &[]).unwrap();
        assert_eq!(peek_magic(&bytes), Some("SEMGAN1"));
        assert!(matches!(from_bytes("PXSYN1", &bytes), Err(Error::Checkpoint(_))));
    }
}
