//! Named plane stacks (`PLNS`): power maps as `f64`, masks as `u8`.
//!
//! Layout: magic, `u16` version, `u8` dtype (1 = u8, 3 = f64), `u32`
//! height, `u32` width, `u16` plane count, then each plane name as a
//! `u16`-length-prefixed string, then the planes row-major.

use std::path::Path;

use super::bytes::{Reader, Writer};
use super::{read_file, write_file, IoError};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"PLNS";
pub const VERSION: u16 = 1;
const DTYPE_U8: u8 = 1;
const DTYPE_F64: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum PlaneData {
    U8(Vec<Grid<u8>>),
    F64(Vec<Grid<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneStack {
    pub names: Vec<String>,
    pub data: PlaneData,
}

impl PlaneStack {
    pub fn f64<S: Into<String>>(names: impl IntoIterator<Item = S>, planes: Vec<Grid<f64>>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect(), data: PlaneData::F64(planes) }
    }

    pub fn u8<S: Into<String>>(names: impl IntoIterator<Item = S>, planes: Vec<Grid<u8>>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect(), data: PlaneData::U8(planes) }
    }

    fn dims(&self) -> Option<(usize, usize, usize)> {
        match &self.data {
            PlaneData::U8(p) => p.first().map(|g| (p.len(), g.height(), g.width())),
            PlaneData::F64(p) => p.first().map(|g| (p.len(), g.height(), g.width())),
        }
    }

    pub fn as_f64(&self) -> Option<&[Grid<f64>]> {
        match &self.data {
            PlaneData::F64(p) => Some(p),
            PlaneData::U8(_) => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[Grid<u8>]> {
        match &self.data {
            PlaneData::U8(p) => Some(p),
            PlaneData::F64(_) => None,
        }
    }
}

pub fn encode_planes(stack: &PlaneStack) -> Result<Vec<u8>, IoError> {
    let (n, h, w) = stack.dims().ok_or_else(|| IoError::Malformed("empty plane stack".into()))?;
    if stack.names.len() != n {
        return Err(IoError::Malformed(format!("{} names for {n} planes", stack.names.len())));
    }
    let mut out = Writer::header(MAGIC, VERSION);
    out.u8(match stack.data {
        PlaneData::U8(_) => DTYPE_U8,
        PlaneData::F64(_) => DTYPE_F64,
    });
    out.u32(h as u32);
    out.u32(w as u32);
    out.u16(n as u16);
    for name in &stack.names {
        out.string(name);
    }
    match &stack.data {
        PlaneData::U8(planes) => {
            for p in planes {
                if p.height() != h || p.width() != w {
                    return Err(IoError::Malformed("planes differ in size".into()));
                }
                out.buf.extend_from_slice(p.as_slice());
            }
        }
        PlaneData::F64(planes) => {
            for p in planes {
                if p.height() != h || p.width() != w {
                    return Err(IoError::Malformed("planes differ in size".into()));
                }
                p.iter().for_each(|v| out.f64(*v));
            }
        }
    }
    Ok(out.buf)
}

pub fn decode_planes(bytes: &[u8]) -> Result<PlaneStack, IoError> {
    let mut r = Reader::new(bytes);
    r.header(MAGIC, VERSION)?;
    let dtype = r.u8()?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let n = r.u16()? as usize;
    let names = (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let data = match dtype {
        DTYPE_U8 => PlaneData::U8(
            (0..n)
                .map(|_| Ok(Grid::from_vec(h, w, r.take(h * w)?.to_vec()).expect("sized")))
                .collect::<Result<_, IoError>>()?,
        ),
        DTYPE_F64 => PlaneData::F64(
            (0..n)
                .map(|_| {
                    let v = (0..h * w).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
                    Ok(Grid::from_vec(h, w, v).expect("sized"))
                })
                .collect::<Result<_, IoError>>()?,
        ),
        other => return Err(IoError::Malformed(format!("unknown dtype {other}"))),
    };
    r.finish()?;
    Ok(PlaneStack { names, data })
}

pub fn write_planes(stack: &PlaneStack, path: &Path) -> Result<(), IoError> {
    write_file(path, &encode_planes(stack)?)
}

pub fn read_planes(path: &Path) -> Result<PlaneStack, IoError> {
    decode_planes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let f = PlaneStack::f64(
            ["a", "b"],
            vec![Grid::from_fn(3, 4, |r, c| r as f64 * 0.1 + c as f64 / 3.0), Grid::filled(3, 4, -0.0)],
        );
        assert_eq!(decode_planes(&encode_planes(&f).unwrap()).unwrap(), f);
        let m = PlaneStack::u8(["m"], vec![Grid::from_fn(2, 5, |r, c| ((r + c) % 2) as u8)]);
        assert_eq!(decode_planes(&encode_planes(&m).unwrap()).unwrap(), m);
        let bytes = encode_planes(&m).unwrap();
        assert!(matches!(decode_planes(&bytes[..bytes.len() - 1]), Err(IoError::Truncated { .. })));
        assert!(encode_planes(&PlaneStack::u8(["x", "y"], vec![Grid::filled(1, 1, 0)])).is_err());
    }
}
