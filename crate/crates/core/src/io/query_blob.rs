//! Scattering query sets (`SQRY`).
//!
//! Layout: magic, `u16` version, `u32` embedding version, `u16` count,
//! then per query `u8` basis index, `u64` seed, `u32` m, 768 `f64` and
//! 256 `f64`.

use std::path::Path;

use super::bytes::{Reader, Writer};
use super::{read_file, write_file, IoError};
use crate::bases::BasisKind;
use crate::queries::{ScatteringQuery, EMBEDDING_VERSION, EMBED_DIM, QUERY_DIM};

pub const MAGIC: &[u8; 4] = b"SQRY";
pub const VERSION: u16 = 1;

pub fn encode_queries(queries: &[ScatteringQuery]) -> Vec<u8> {
    let mut w = Writer::header(MAGIC, VERSION);
    w.u32(EMBEDDING_VERSION);
    w.u16(queries.len() as u16);
    for q in queries {
        w.u8(q.kind.index() as u8);
        w.u64(q.seed);
        w.u32(q.m as u32);
        q.vec768.iter().for_each(|v| w.f64(*v));
        q.vec256.iter().for_each(|v| w.f64(*v));
    }
    w.buf
}

pub fn decode_queries(bytes: &[u8]) -> Result<Vec<ScatteringQuery>, IoError> {
    let mut r = Reader::new(bytes);
    r.header(MAGIC, VERSION)?;
    let emb = r.u32()?;
    if emb != EMBEDDING_VERSION {
        return Err(IoError::Malformed(format!("embedding version {emb}, this build uses {EMBEDDING_VERSION}")));
    }
    let n = r.u16()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let idx = r.u8()? as usize;
        let kind = *BasisKind::ALL.get(idx).ok_or_else(|| IoError::Malformed(format!("basis index {idx}")))?;
        let seed = r.u64()?;
        let m = r.u32()? as usize;
        let vec768 = (0..EMBED_DIM).map(|_| r.f64()).collect::<Result<_, _>>()?;
        let vec256 = (0..QUERY_DIM).map(|_| r.f64()).collect::<Result<_, _>>()?;
        out.push(ScatteringQuery { kind, vec768, vec256, seed, m });
    }
    r.finish()?;
    Ok(out)
}

pub fn write_queries(queries: &[ScatteringQuery], path: &Path) -> Result<(), IoError> {
    write_file(path, &encode_queries(queries))
}

pub fn read_queries(path: &Path) -> Result<Vec<ScatteringQuery>, IoError> {
    decode_queries(&read_file(path)?)
}
