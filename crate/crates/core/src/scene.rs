//! Synthetic PolSAR scenes with known expected coherency per region.
//!
//! Each pixel's Pauli vector is drawn from a zero-mean circular complex
//! Gaussian whose covariance is the region's target coherency, so the
//! ensemble mean of `k k^H` equals the target exactly.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bases::{synthesize_pixel, BasisKind, TenPowers};
use crate::grid::Grid;
use crate::polsar::{CoherencyMatrix, PauliVector, PolsarRaster, RasterMetadata, ScatteringMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("scene declares no regions")]
    NoRegions,
    #[error("region {0} covers no pixels")]
    EmptyRegion(usize),
    #[error("pixel references region {index} but only {count} are declared")]
    UnknownRegion { index: usize, count: usize },
    #[error("region {0} has negative or non-finite powers")]
    InvalidPowers(usize),
}

/// A region map tiling the grid plus the ten-component powers of each region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub region_map: Grid<usize>,
    pub regions: Vec<TenPowers>,
}

impl SceneSpec {
    pub fn uniform(height: usize, width: usize, powers: TenPowers) -> Self {
        Self { region_map: Grid::filled(height, width, 0), regions: vec![powers] }
    }

    /// Splits the grid into `rows x cols` equal-ish blocks, numbered row-major.
    pub fn blocks(height: usize, width: usize, rows: usize, cols: usize, regions: Vec<TenPowers>) -> Self {
        let region_map = Grid::from_fn(height, width, |r, c| (r * rows / height) * cols + c * cols / width);
        Self { region_map, regions }
    }

    /// Four quadrants dominated by surface, double-bounce, volume and helix
    /// scattering respectively, with a weak background of the other bases.
    pub fn demo(height: usize, width: usize) -> Self {
        let bg = TenPowers::uniform(0.02);
        let regions = vec![
            bg.with(BasisKind::Surface, 1.6).with(BasisKind::Volume, 0.2),
            bg.with(BasisKind::DoubleBounce, 1.4).with(BasisKind::Surface, 0.1),
            bg.with(BasisKind::Volume, 1.2).with(BasisKind::Helix, 0.05),
            bg.with(BasisKind::Helix, 0.8).with(BasisKind::DoubleBounce, 0.3),
        ];
        Self::blocks(height, width, 2, 2, regions)
    }

    pub fn height(&self) -> usize {
        self.region_map.height()
    }

    pub fn width(&self) -> usize {
        self.region_map.width()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.regions.is_empty() {
            return Err(SceneError::NoRegions);
        }
        let mut seen = vec![false; self.regions.len()];
        for &i in self.region_map.iter() {
            if i >= self.regions.len() {
                return Err(SceneError::UnknownRegion { index: i, count: self.regions.len() });
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(SceneError::EmptyRegion(i));
        }
        if let Some(i) = self.regions.iter().position(|p| !p.is_valid()) {
            return Err(SceneError::InvalidPowers(i));
        }
        Ok(())
    }
}

/// Lower-triangular `L` with `L L^H = t` for a PSD Hermitian `t`. Pivots that
/// vanish (rank-deficient targets) produce zero columns.
pub fn psd_factor(t: &CoherencyMatrix) -> [[Complex64; 3]; 3] {
    let a = t.to_full();
    let zero = Complex64::new(0.0, 0.0);
    let mut l = [[zero; 3]; 3];
    let tol = 1e-14 * t.trace().abs().max(f64::MIN_POSITIVE);
    for j in 0..3 {
        let mut d = a[j][j].re;
        for lk in &l[j][..j] {
            d -= lk.norm_sqr();
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[j][j] = Complex64::new(ljj, 0.0);
        for i in j + 1..3 {
            let dot: Complex64 = l[i][..j].iter().zip(&l[j][..j]).map(|(x, y)| x * y.conj()).sum();
            l[i][j] = (a[i][j] - dot) / ljj;
        }
    }
    l
}

/// Draws a speckled raster for `spec`. Each region gets its own RNG stream
/// derived from `seed`, so output does not depend on scheduling.
pub fn synthesize_scene(spec: &SceneSpec, seed: u64) -> Result<PolsarRaster, SceneError> {
    spec.validate()?;
    let (h, w) = (spec.height(), spec.width());

    let per_region: Vec<Vec<(usize, ScatteringMatrix)>> = spec
        .regions
        .par_iter()
        .enumerate()
        .map(|(ri, powers)| {
            let factor = psd_factor(&synthesize_pixel(powers));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ri as u64);
            spec.region_map
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == ri)
                .map(|(idx, _)| {
                    let mut z = [Complex64::new(0.0, 0.0); 3];
                    for zi in z.iter_mut() {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        *zi = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                    }
                    let mut k = [Complex64::new(0.0, 0.0); 3];
                    for (i, ki) in k.iter_mut().enumerate() {
                        *ki = (0..=i).map(|j| factor[i][j] * z[j]).sum();
                    }
                    (idx, PauliVector(k).to_scattering())
                })
                .collect()
        })
        .collect();

    let mut pixels = vec![ScatteringMatrix::default(); h * w];
    for region in per_region {
        for (idx, s) in region {
            pixels[idx] = s;
        }
    }
    let mut metadata = RasterMetadata { sensor: "synthetic".into(), resolution_m: 1.0, ..Default::default() };
    metadata.tags.insert("seed".into(), seed.to_string());
    metadata.tags.insert("regions".into(), spec.regions.len().to_string());
    Ok(PolsarRaster::new(h, w, pixels, metadata).expect("finite synthetic pixels"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polsar::{pauli_vector, rank1_coherency, span_pixel};

    #[test]
    fn factor_reproduces_target() {
        for k in BasisKind::ALL {
            let t = synthesize_pixel(&TenPowers::one_hot(k, 2.5).with(BasisKind::Surface, 0.3));
            let l = psd_factor(&t);
            let mut r = [[Complex64::new(0.0, 0.0); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    r[i][j] = (0..3).map(|m| l[i][m] * l[j][m].conj()).sum();
                }
            }
            let full = t.to_full();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((r[i][j] - full[i][j]).norm() < 1e-12, "{k:?}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = SceneSpec {
            region_map: Grid::filled(2, 2, 0),
            regions: vec![TenPowers::uniform(1.0), TenPowers::uniform(1.0)],
        };
        assert_eq!(synthesize_scene(&spec, 1), Err(SceneError::EmptyRegion(1)));
        let spec = SceneSpec { region_map: Grid::filled(2, 2, 3), regions: vec![TenPowers::uniform(1.0)] };
        assert!(matches!(synthesize_scene(&spec, 1), Err(SceneError::UnknownRegion { .. })));
        let spec = SceneSpec::uniform(2, 2, TenPowers::uniform(-1.0));
        assert_eq!(synthesize_scene(&spec, 1), Err(SceneError::InvalidPowers(0)));
    }

    #[test]
    fn zero_power_scene_is_zero() {
        let r = synthesize_scene(&SceneSpec::uniform(4, 4, TenPowers::default()), 9).unwrap();
        assert!(r.pixels.iter().all(|s| span_pixel(s) == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SceneSpec::demo(16, 16);
        let a = synthesize_scene(&spec, 42).unwrap();
        let b = synthesize_scene(&spec, 42).unwrap();
        let c = synthesize_scene(&spec, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn surface_scene_mean_within_three_sigma() {
        let n = 64 * 64;
        let r = synthesize_scene(&SceneSpec::uniform(64, 64, TenPowers::one_hot(BasisKind::Surface, 10.0)), 3).unwrap();
        let mean = r
            .pixels
            .iter()
            .fold(CoherencyMatrix::ZERO, |m, s| m.add(&rank1_coherency(&pauli_vector(s))))
            .scaled(1.0 / n as f64);
        // t11 = 10 |z|^2 with |z|^2 ~ Exp(1): standard error 10 / sqrt(n).
        let sigma = 10.0 / (n as f64).sqrt();
        assert!((mean.t11 - 10.0).abs() < 3.0 * sigma, "{mean:?}");
        assert!(mean.t22.abs() < 1e-20 && mean.t33.abs() < 1e-20);
    }
}
