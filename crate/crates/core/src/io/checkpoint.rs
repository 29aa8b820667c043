//! Model checkpoints: a binary tensor blob (`PPCK`) and a JSON manifest
//! with shapes, configuration and the blob digest.
//!
//! Blob layout: magic, `u16` version, `u32` tensor count, then per tensor a
//! `u16`-prefixed name, `u32` rows, `u32` cols and `rows*cols` `f64`.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::bytes::{Reader, Writer};
use super::manifest::sha256_bytes;
use super::{read_file, write_file, IoError};
use crate::pretrain::{DecoderConfig, EncoderConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"PPCK";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u16,
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub tensors: Vec<TensorEntry>,
    pub parameter_count: usize,
    pub blob: String,
    pub blob_sha256: String,
}

pub fn encode_blob(params: &ModelParams) -> Vec<u8> {
    let tensors = params.tensors();
    let mut w = Writer::header(MAGIC, VERSION);
    w.u32(tensors.len() as u32);
    for (name, m) in tensors {
        w.string(&name);
        w.u32(m.nrows() as u32);
        w.u32(m.ncols() as u32);
        m.iter().for_each(|v| w.f64(*v));
    }
    w.buf
}

fn decode_blob(bytes: &[u8]) -> Result<Vec<(String, Array2<f64>)>, IoError> {
    let mut r = Reader::new(bytes);
    r.header(MAGIC, VERSION)?;
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let v = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        out.push((name, Array2::from_shape_vec((rows, cols), v).expect("sized")));
    }
    r.finish()?;
    Ok(out)
}

/// Writes `<stem>.ppck` and `<stem>.json` into `dir`; returns both file names.
pub fn save_checkpoint(params: &ModelParams, dir: &Path, stem: &str) -> Result<(String, String), IoError> {
    let blob = encode_blob(params);
    let blob_name = format!("{stem}.ppck");
    let manifest = CheckpointManifest {
        format_version: VERSION,
        encoder: params.encoder,
        decoder: params.decoder,
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, m)| TensorEntry { name, shape: [m.nrows(), m.ncols()] })
            .collect(),
        parameter_count: params.parameter_count(),
        blob: blob_name.clone(),
        blob_sha256: sha256_bytes(&blob),
    };
    write_file(&dir.join(&blob_name), &blob)?;
    let json_name = format!("{stem}.json");
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_file(&dir.join(&json_name), &json)?;
    Ok((blob_name, json_name))
}

/// Loads from the JSON manifest at `path`; the blob is resolved next to it.
pub fn load_checkpoint(path: &Path) -> Result<ModelParams, IoError> {
    let manifest: CheckpointManifest = serde_json::from_slice(&read_file(path)?)?;
    if manifest.format_version != VERSION {
        return Err(IoError::UnsupportedVersion { found: manifest.format_version, supported: VERSION });
    }
    let blob_path = path.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let blob = read_file(&blob_path)?;
    if sha256_bytes(&blob) != manifest.blob_sha256 {
        return Err(IoError::Malformed("checkpoint blob digest mismatch".into()));
    }
    let tensors = decode_blob(&blob)?;
    let mut params =
        ModelParams::init(manifest.encoder, manifest.decoder).map_err(|e| IoError::Malformed(e.to_string()))?;
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    if names.len() != tensors.len() {
        return Err(IoError::Malformed(format!("expected {} tensors, blob has {}", names.len(), tensors.len())));
    }
    for ((slot, name), (got_name, value)) in params.tensors_mut().into_iter().zip(names).zip(tensors) {
        if name != got_name || slot.dim() != value.dim() {
            return Err(IoError::Malformed(format!(
                "tensor {got_name} {:?} does not match {name} {:?}",
                value.dim(),
                slot.dim()
            )));
        }
        *slot = value;
    }
    Ok(params)
}
