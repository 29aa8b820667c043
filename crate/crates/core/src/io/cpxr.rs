//! CPXR raster container.
//!
//! | field    | type                                   |
//! |----------|----------------------------------------|
//! | magic    | `b"CPXR"`                              |
//! | version  | `u16` (1)                              |
//! | height   | `u32`                                  |
//! | width    | `u32`                                  |
//! | channels | `u16` (8)                              |
//! | planes   | 8 x `height*width` `f32`, re/im of HH, HV, VH, VV |
//! | metadata | `u32` byte length, then UTF-8 JSON     |
//!
//! Samples are stored as `f32`: reading then writing reproduces a file
//! byte for byte, and rasters whose samples are `f32`-representable survive
//! a write then read unchanged.

use std::path::Path;

use num_complex::Complex64;

use super::bytes::{Reader, Writer};
use super::{read_file, write_file, IoError};
use crate::polsar::{PolsarRaster, RasterMetadata, ScatteringMatrix};

pub const MAGIC: &[u8; 4] = b"CPXR";
pub const VERSION: u16 = 1;
pub const CHANNELS: u16 = 8;

pub fn encode_cpxr(raster: &PolsarRaster) -> Result<Vec<u8>, IoError> {
    let mut w = Writer::header(MAGIC, VERSION);
    w.u32(raster.height() as u32);
    w.u32(raster.width() as u32);
    w.u16(CHANNELS);
    for plane in raster.to_planes() {
        for v in plane {
            w.f32(v as f32);
        }
    }
    let meta = serde_json::to_vec(&raster.metadata)?;
    w.u32(meta.len() as u32);
    w.buf.extend_from_slice(&meta);
    Ok(w.buf)
}

pub fn decode_cpxr(bytes: &[u8]) -> Result<PolsarRaster, IoError> {
    let mut r = Reader::new(bytes);
    r.header(MAGIC, VERSION)?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let channels = r.u16()?;
    if channels != CHANNELS {
        return Err(IoError::ChannelCount(channels));
    }
    let n = h * w;
    let data = r.take(n * 8 * 4)?;
    let sample = |plane: usize, i: usize| {
        let o = (plane * n + i) * 4;
        f32::from_le_bytes(data[o..o + 4].try_into().expect("4 bytes")) as f64
    };
    let pixels = (0..n)
        .map(|i| {
            let ch = |c: usize| Complex64::new(sample(2 * c, i), sample(2 * c + 1, i));
            ScatteringMatrix::from_channels([ch(0), ch(1), ch(2), ch(3)])
        })
        .collect();
    let meta_len = r.u32()? as usize;
    let metadata: RasterMetadata = serde_json::from_slice(r.take(meta_len)?)?;
    r.finish()?;
    PolsarRaster::new(h, w, pixels, metadata).map_err(|e| IoError::Malformed(e.to_string()))
}

pub fn write_cpxr(raster: &PolsarRaster, path: &Path) -> Result<(), IoError> {
    write_file(path, &encode_cpxr(raster)?)
}

pub fn read_cpxr(path: &Path) -> Result<PolsarRaster, IoError> {
    decode_cpxr(&read_file(path)?)
}
