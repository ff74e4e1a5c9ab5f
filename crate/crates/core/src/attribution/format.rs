//! `.attr` exchange format: one JSON header line terminated by LF, then
//! `S_r * T_r * h` little-endian f32 values in (source, target, hidden)
//! row-major order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AttributionTensor;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    instance_id: String,
    source_tokens: Vec<String>,
    target_tokens: Vec<String>,
    hidden_size: usize,
    source_word_map: Vec<usize>,
    target_word_map: Vec<usize>,
    #[serde(flatten)]
    extra: serde_json::Map<String, serde_json::Value>,
}

pub fn write_tensor_bytes(tensor: &AttributionTensor) -> Result<Vec<u8>> {
    tensor.validate()?;
    let header = Header {
        version: FORMAT_VERSION,
        instance_id: tensor.instance_id.clone(),
        source_tokens: tensor.source_tokens.clone(),
        target_tokens: tensor.target_tokens.clone(),
        hidden_size: tensor.hidden_size,
        source_word_map: tensor.source_word_map.clone(),
        target_word_map: tensor.target_word_map.clone(),
        extra: tensor.metadata.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(tensor.scores.len() * 4);
    for v in &tensor.scores {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_tensor_bytes(bytes: &[u8]) -> Result<AttributionTensor> {
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {} (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    if header.hidden_size == 0 {
        return Err(Error::Format("hidden_size must be positive".into()));
    }
    let payload = &bytes[newline + 1..];
    let count = header.source_tokens.len() * header.target_tokens.len() * header.hidden_size;
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let scores = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let tensor = AttributionTensor {
        instance_id: header.instance_id,
        source_tokens: header.source_tokens,
        target_tokens: header.target_tokens,
        hidden_size: header.hidden_size,
        source_word_map: header.source_word_map,
        target_word_map: header.target_word_map,
        scores,
        metadata: header.extra,
    };
    tensor.validate()?;
    Ok(tensor)
}

pub fn write_tensor(tensor: &AttributionTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_tensor_bytes(tensor)?;
    // Write to a sibling temp file then rename so readers never see a partial file.
    let tmp = path.with_extension("attr.tmp");
    let mut file = std::fs::File::create(&tmp)
        .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    drop(file);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<AttributionTensor> {
    let path = path.as_ref();
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    read_tensor_bytes(&bytes)
}
