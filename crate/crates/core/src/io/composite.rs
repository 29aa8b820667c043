//! 8-bit RGB composites. Each channel is divided by 2.5 times its scene
//! mean, mapped to `[0, 255]` and clipped.

use std::path::Path;

use super::{write_file, IoError};
use crate::grid::Grid;
use crate::polsar::{pauli_vector, PolsarRaster};
use crate::yamaguchi::ComponentStack;

/// Multiple of the channel mean that maps to full intensity.
pub const MEAN_SCALE: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositeMode {
    /// `(|k2|^2, |k3|^2, |k1|^2)` as RGB.
    Pauli,
    /// `(Pd, Pv, Ps)` as RGB.
    Yamaguchi,
}

pub enum CompositeSource<'a> {
    Raster(&'a PolsarRaster),
    Stack(&'a ComponentStack),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    /// Interleaved RGB, row-major.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = 3 * (row * self.width + col);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), IoError> {
        write_file(path, &self.to_ppm())
    }
}

fn scale_channel(values: &Grid<f64>) -> Vec<u8> {
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let full = MEAN_SCALE * mean;
    values.iter().map(|v| if full > 0.0 { (255.0 * v / full).clamp(0.0, 255.0).round() as u8 } else { 0 }).collect()
}

fn from_channels(r: &Grid<f64>, g: &Grid<f64>, b: &Grid<f64>) -> RgbImage {
    let (r8, g8, b8) = (scale_channel(r), scale_channel(g), scale_channel(b));
    let data = r8.iter().zip(&g8).zip(&b8).flat_map(|((r, g), b)| [*r, *g, *b]).collect();
    RgbImage { height: r.height(), width: r.width(), data }
}

/// Pauli mode needs a raster and Yamaguchi mode a component stack.
pub fn emit_composite(source: CompositeSource<'_>, mode: CompositeMode) -> Result<RgbImage, IoError> {
    match (source, mode) {
        (CompositeSource::Raster(raster), CompositeMode::Pauli) => {
            let k = raster.pixels.map(pauli_vector);
            let ch = |i: usize| k.map(|k| k.0[i].norm_sqr());
            Ok(from_channels(&ch(1), &ch(2), &ch(0)))
        }
        (CompositeSource::Stack(stack), CompositeMode::Yamaguchi) => {
            let [ps, pd, pv, _] = &stack.planes;
            Ok(from_channels(pd, pv, ps))
        }
        (CompositeSource::Raster(_), CompositeMode::Yamaguchi) => {
            Err(IoError::Malformed("yamaguchi composite needs a component stack".into()))
        }
        (CompositeSource::Stack(_), CompositeMode::Pauli) => {
            Err(IoError::Malformed("pauli composite needs a raster".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{BasisKind, TenPowers};
    use crate::scene::{synthesize_scene, SceneSpec};

    #[test]
    fn surface_scene_is_blue() {
        let r = synthesize_scene(&SceneSpec::uniform(8, 8, TenPowers::one_hot(BasisKind::Surface, 1.0)), 4).unwrap();
        let img = emit_composite(CompositeSource::Raster(&r), CompositeMode::Pauli).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                let [red, green, _] = img.pixel(row, col);
                assert_eq!((red, green), (0, 0));
            }
        }
        assert!(img.data.chunks(3).any(|p| p[2] > 0));
    }

    #[test]
    fn zero_and_constant_scenes() {
        let z = PolsarRaster::zeros(4, 4);
        let img = emit_composite(CompositeSource::Raster(&z), CompositeMode::Pauli).unwrap();
        assert!(img.data.iter().all(|v| *v == 0));

        let c = Grid::filled(3, 3, 1.7);
        let stack = ComponentStack::new([c.clone(), c.clone(), c.clone(), c]).unwrap();
        let img = emit_composite(CompositeSource::Stack(&stack), CompositeMode::Yamaguchi).unwrap();
        // 255 * 1 / 2.5
        assert!(img.data.iter().all(|v| *v == 102));
        assert!(img.to_ppm().starts_with(b"P6\n3 3\n255\n"));
        assert_eq!(img.to_ppm().len(), 11 + 27);
    }

    #[test]
    fn mode_source_mismatch() {
        let z = PolsarRaster::zeros(2, 2);
        assert!(emit_composite(CompositeSource::Raster(&z), CompositeMode::Yamaguchi).is_err());
    }
}
