use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complex_nn::{EmbeddingModel, ModelConfig};
use crate::error::{Error, Result};
use crate::rng::substream;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"CVSEIM";
pub const CHECKPOINT_VERSION: u8 = b'1';

#[derive(Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    blocks: Vec<BlockEntry>,
}

/// Magic, version byte, `u32` length of a JSON header, then every parameter
/// block (including running statistics and centers) as little-endian `f64`.
pub fn checkpoint_bytes(model: &EmbeddingModel) -> Result<Vec<u8>> {
    let blocks = model.named_blocks();
    let header = Header {
        config: model.config.clone(),
        blocks: blocks.iter().map(|b| BlockEntry { name: b.name.clone(), len: b.values.len() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let total: usize = blocks.iter().map(|b| b.values.len()).sum();
    let mut out = Vec::with_capacity(11 + json.len() + 8 * total);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for b in &blocks {
        for v in b.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, checkpoint_bytes(model)?)?;
    Ok(())
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<EmbeddingModel> {
    if bytes.len() < 11 || &bytes[..6] != CHECKPOINT_MAGIC {
        return Err(corrupt("not a model checkpoint"));
    }
    if bytes[6] != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {}", bytes[6])));
    }
    let hlen = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(11..11 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let mut model = EmbeddingModel::new(header.config, &mut substream(0, 0))
        .map_err(|e| Error::ConfigMismatch(format!("checkpoint config is invalid: {e}")))?;
    let mut data = &bytes[11 + hlen..];
    {
        let blocks = model.named_blocks_mut();
        if blocks.len() != header.blocks.len() {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint lists {} parameter blocks, config implies {}",
                header.blocks.len(),
                blocks.len()
            )));
        }
        for (block, entry) in blocks.into_iter().zip(&header.blocks) {
            if block.name != entry.name || block.values.len() != entry.len {
                return Err(Error::ConfigMismatch(format!(
                    "block {} ({} values) does not match {} ({} values)",
                    entry.name,
                    entry.len,
                    block.name,
                    block.values.len()
                )));
            }
            let need = 8 * entry.len;
            if data.len() < need {
                return Err(corrupt(format!("parameter block {} is truncated", entry.name)));
            }
            for (v, chunk) in block.values.iter_mut().zip(data[..need].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            data = &data[need..];
        }
    }
    if !data.is_empty() {
        return Err(corrupt(format!("{} trailing bytes after parameters", data.len())));
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    checkpoint_from_bytes(&fs::read(path)?)
}

/// Loads a checkpoint and requires its architecture to equal `expected`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<EmbeddingModel> {
    let model = load_checkpoint(path)?;
    check_config(&model.config, expected)?;
    Ok(model)
}

pub fn check_config(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    let f = serde_json::to_value(found)?;
    let e = serde_json::to_value(expected)?;
    let diffs: Vec<String> = e
        .as_object()
        .into_iter()
        .flatten()
        .filter(|(k, v)| f.get(k.as_str()) != Some(v))
        .map(|(k, v)| format!("{k}: checkpoint {} vs expected {}", f.get(k.as_str()).unwrap_or(&serde_json::Value::Null), v))
        .collect();
    Err(Error::ConfigMismatch(diffs.join(", ")))
}
