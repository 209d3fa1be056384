//! Single-file model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `RSYNCKPT`                          |
//! | 8      | 4    | format version (`u32`)                    |
//! | 12     | 8    | header length `H` (`u64`)                 |
//! | 20     | H    | UTF-8 JSON header                         |
//! | 20 + H | ...  | parameter values, `f64`, row-major        |
//!
//! The header holds the training configuration (including the seed), the
//! fitted codecs, the links, the schema fingerprint and the name and shape
//! of every parameter array in the order their values follow. Reloading is
//! bit-exact.

use std::fs;
use std::path::Path;

use relsynth_core::preprocess::TableCodec;
use relsynth_core::{GraphVaeModel, Link, Matrix, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSYNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREAMBLE: usize = 20;

#[derive(Debug, Serialize, Deserialize)]
struct ParamLayout {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    codecs: Vec<TableCodec>,
    links: Vec<Link>,
    fingerprint: String,
    parameters: Vec<ParamLayout>,
}

pub fn to_bytes(model: &GraphVaeModel) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        codecs: model.codecs.clone(),
        links: model.links.clone(),
        fingerprint: model.fingerprint.clone(),
        parameters: model
            .store()
            .iter()
            .map(|p| ParamLayout { name: p.name.clone(), rows: p.value.rows(), cols: p.value.cols() })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 8 * model.store().parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in model.store().iter() {
        for x in p.value.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<GraphVaeModel> {
    let corrupt = |message: String| Error::CorruptCheckpoint { path: path.to_path_buf(), message };
    if bytes.len() < PREAMBLE || &bytes[..8] != MAGIC {
        return Err(corrupt("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[PREAMBLE..];
    let header_len = usize::try_from(header_len).ok().filter(|&n| n <= body.len());
    let Some(header_len) = header_len else {
        return Err(corrupt("header length exceeds file size".into()));
    };
    let header: Header =
        serde_json::from_slice(&body[..header_len]).map_err(|e| corrupt(format!("header: {e}")))?;

    let mut data = &body[header_len..];
    let mut params = Vec::with_capacity(header.parameters.len());
    for p in header.parameters {
        let n = p.rows.checked_mul(p.cols).filter(|n| n * 8 <= data.len());
        let Some(n) = n else {
            return Err(corrupt(format!("parameter `{}` is truncated", p.name)));
        };
        let values = data[..n * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        data = &data[n * 8..];
        params.push((p.name, Matrix::from_vec(p.rows, p.cols, values)));
    }
    if !data.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", data.len())));
    }
    Ok(GraphVaeModel::from_parts(header.config, header.codecs, header.links, header.fingerprint, params)?)
}

pub fn save_checkpoint(model: &GraphVaeModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<GraphVaeModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
