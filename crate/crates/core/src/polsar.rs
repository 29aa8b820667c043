//! Per-pixel polarimetric primitives: scattering matrices, Pauli vectors,
//! coherency matrices and total backscattered power (SPAN).

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

/// Real and imaginary part of one polarimetric channel, linear amplitude units.
pub type ComplexSample = Complex64;

#[derive(Debug, Error, PartialEq)]
pub enum PolsarError {
    #[error("boxcar window must be odd and >= 1, got {0}")]
    EvenWindow(usize),
    #[error("boxcar window {window} exceeds raster extent {height}x{width}")]
    WindowTooLarge { window: usize, height: usize, width: usize },
    #[error("raster has {got} pixels, expected {height}x{width}")]
    PixelCount { got: usize, height: usize, width: usize },
    #[error("non-finite sample at pixel {0}")]
    NonFinite(usize),
}

/// The 2x2 complex scattering matrix of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScatteringMatrix {
    pub s_hh: ComplexSample,
    pub s_hv: ComplexSample,
    pub s_vh: ComplexSample,
    pub s_vv: ComplexSample,
}

impl ScatteringMatrix {
    pub fn new(s_hh: ComplexSample, s_hv: ComplexSample, s_vh: ComplexSample, s_vv: ComplexSample) -> Self {
        Self { s_hh, s_hv, s_vh, s_vv }
    }

    pub fn is_finite(&self) -> bool {
        self.channels().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Channels in file order: HH, HV, VH, VV.
    pub fn channels(&self) -> [ComplexSample; 4] {
        [self.s_hh, self.s_hv, self.s_vh, self.s_vv]
    }

    pub fn from_channels(ch: [ComplexSample; 4]) -> Self {
        Self::new(ch[0], ch[1], ch[2], ch[3])
    }
}

/// Pauli scattering vector `k_p`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PauliVector(pub [ComplexSample; 3]);

impl PauliVector {
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|k| k.norm_sqr()).sum()
    }

    /// Inverse of [`pauli_vector`] for a reciprocal target.
    pub fn to_scattering(&self) -> ScatteringMatrix {
        let [k1, k2, k3] = self.0;
        let hh = (k1 + k2) * FRAC_1_SQRT_2;
        let vv = (k1 - k2) * FRAC_1_SQRT_2;
        let xv = k3 * FRAC_1_SQRT_2;
        ScatteringMatrix::new(hh, xv, xv, vv)
    }
}

/// 3x3 Hermitian coherency matrix. Only the upper triangle is stored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoherencyMatrix {
    pub t11: f64,
    pub t22: f64,
    pub t33: f64,
    pub t12: ComplexSample,
    pub t13: ComplexSample,
    pub t23: ComplexSample,
}

impl CoherencyMatrix {
    pub const ZERO: CoherencyMatrix = CoherencyMatrix {
        t11: 0.0,
        t22: 0.0,
        t33: 0.0,
        t12: Complex64::new(0.0, 0.0),
        t13: Complex64::new(0.0, 0.0),
        t23: Complex64::new(0.0, 0.0),
    };

    pub fn diag(t11: f64, t22: f64, t33: f64) -> Self {
        Self { t11, t22, t33, ..Self::ZERO }
    }

    pub fn trace(&self) -> f64 {
        self.t11 + self.t22 + self.t33
    }

    /// Full 3x3 matrix, lower triangle filled by conjugation.
    pub fn to_full(&self) -> [[Complex64; 3]; 3] {
        let r = |x: f64| Complex64::new(x, 0.0);
        [
            [r(self.t11), self.t12, self.t13],
            [self.t12.conj(), r(self.t22), self.t23],
            [self.t13.conj(), self.t23.conj(), r(self.t33)],
        ]
    }

    /// Builds from a full matrix, taking the real part of the diagonal and
    /// the upper triangle as stored.
    pub fn from_full(m: &[[Complex64; 3]; 3]) -> Self {
        Self { t11: m[0][0].re, t22: m[1][1].re, t33: m[2][2].re, t12: m[0][1], t13: m[0][2], t23: m[1][2] }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t11: self.t11 * c,
            t22: self.t22 * c,
            t33: self.t33 * c,
            t12: self.t12 * c,
            t13: self.t13 * c,
            t23: self.t23 * c,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            t11: self.t11 + o.t11,
            t22: self.t22 + o.t22,
            t33: self.t33 + o.t33,
            t12: self.t12 + o.t12,
            t13: self.t13 + o.t13,
            t23: self.t23 + o.t23,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scaled(-1.0))
    }

    pub fn mul_vec(&self, y: &[Complex64; 3]) -> [Complex64; 3] {
        let m = self.to_full();
        let mut x = [Complex64::new(0.0, 0.0); 3];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = m[i][0] * y[0] + m[i][1] * y[1] + m[i][2] * y[2];
        }
        x
    }

    /// Frobenius norm of the full matrix.
    pub fn frobenius(&self) -> f64 {
        (self.t11 * self.t11
            + self.t22 * self.t22
            + self.t33 * self.t33
            + 2.0 * (self.t12.norm_sqr() + self.t13.norm_sqr() + self.t23.norm_sqr()))
        .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        [self.t11, self.t22, self.t33].iter().all(|v| v.is_finite())
            && [self.t12, self.t13, self.t23].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Smallest of the 1x1 and 2x2 principal minors and the determinant.
    pub fn min_principal_minor(&self) -> f64 {
        let m12 = self.t11 * self.t22 - self.t12.norm_sqr();
        let m13 = self.t11 * self.t33 - self.t13.norm_sqr();
        let m23 = self.t22 * self.t33 - self.t23.norm_sqr();
        let det = self.determinant();
        [self.t11, self.t22, self.t33, m12, m13, m23, det].into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn determinant(&self) -> f64 {
        // det of a Hermitian matrix is real.
        let m = self.to_full();
        let d = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        d.re
    }

    /// Checks finiteness and PSD-ness up to `rel_tol * trace^2` on the
    /// principal minors (scaled by trace^3 for the determinant).
    pub fn is_valid(&self, rel_tol: f64) -> bool {
        if !self.is_finite() {
            return false;
        }
        let tr = self.trace();
        if tr < -rel_tol {
            return false;
        }
        let tr = tr.max(0.0);
        let m12 = self.t11 * self.t22 - self.t12.norm_sqr();
        let m13 = self.t11 * self.t33 - self.t13.norm_sqr();
        let m23 = self.t22 * self.t33 - self.t23.norm_sqr();
        let tol1 = rel_tol * tr;
        let tol2 = rel_tol * tr * tr;
        self.t11 >= -tol1
            && self.t22 >= -tol1
            && self.t33 >= -tol1
            && m12 >= -tol2
            && m13 >= -tol2
            && m23 >= -tol2
            && self.determinant() >= -tol2 * tr.max(1e-300)
    }
}

/// Free-form raster metadata carried through the container format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RasterMetadata {
    pub sensor: String,
    pub resolution_m: f64,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

/// A grid of scattering matrices (the 8-channel complex input).
#[derive(Debug, Clone, PartialEq)]
pub struct PolsarRaster {
    pub pixels: Grid<ScatteringMatrix>,
    pub metadata: RasterMetadata,
}

impl PolsarRaster {
    pub fn new(
        height: usize,
        width: usize,
        pixels: Vec<ScatteringMatrix>,
        metadata: RasterMetadata,
    ) -> Result<Self, PolsarError> {
        let got = pixels.len();
        let pixels = Grid::from_vec(height, width, pixels).ok_or(PolsarError::PixelCount { got, height, width })?;
        if let Some(i) = pixels.iter().position(|s| !s.is_finite()) {
            return Err(PolsarError::NonFinite(i));
        }
        Ok(Self { pixels, metadata })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { pixels: Grid::filled(height, width, ScatteringMatrix::default()), metadata: RasterMetadata::default() }
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    /// Channel-major real view: 8 planes in the order re(HH), im(HH),
    /// re(HV), im(HV), re(VH), im(VH), re(VV), im(VV).
    pub fn to_planes(&self) -> Vec<Vec<f64>> {
        let mut planes: Vec<Vec<f64>> = (0..8).map(|_| Vec::with_capacity(self.pixels.len())).collect();
        for s in self.pixels.iter() {
            for (c, ch) in s.channels().iter().enumerate() {
                planes[2 * c].push(ch.re);
                planes[2 * c + 1].push(ch.im);
            }
        }
        planes
    }
}

/// Replaces both cross-pol terms by their mean.
pub fn symmetrize_reciprocal(s: &ScatteringMatrix) -> ScatteringMatrix {
    let x = (s.s_hv + s.s_vh) * 0.5;
    ScatteringMatrix { s_hv: x, s_vh: x, ..*s }
}

/// Standard Pauli vector `(S_HH+S_VV, S_HH-S_VV, 2 S_xv) / sqrt 2`. The
/// cross-pol term is the mean of HV and VH, so an unsymmetrized input is
/// treated as its reciprocal symmetrization.
pub fn pauli_vector(s: &ScatteringMatrix) -> PauliVector {
    let xv = (s.s_hv + s.s_vh) * 0.5;
    PauliVector([(s.s_hh + s.s_vv) * FRAC_1_SQRT_2, (s.s_hh - s.s_vv) * FRAC_1_SQRT_2, xv * (2.0 * FRAC_1_SQRT_2)])
}

/// Outer product `k k^H`.
pub fn rank1_coherency(k: &PauliVector) -> CoherencyMatrix {
    let [k1, k2, k3] = k.0;
    CoherencyMatrix {
        t11: k1.norm_sqr(),
        t22: k2.norm_sqr(),
        t33: k3.norm_sqr(),
        t12: k1 * k2.conj(),
        t13: k1 * k3.conj(),
        t23: k2 * k3.conj(),
    }
}

/// Spatially averaged coherency with a square `window`, shrinking at the
/// borders to the in-raster part of the window.
pub fn boxcar_coherency(raster: &PolsarRaster, window: usize) -> Result<Grid<CoherencyMatrix>, PolsarError> {
    let (h, w) = (raster.height(), raster.width());
    if window == 0 || window.is_multiple_of(2) {
        return Err(PolsarError::EvenWindow(window));
    }
    if window > h.min(w) {
        return Err(PolsarError::WindowTooLarge { window, height: h, width: w });
    }
    let rank1 = raster.pixels.map(|s| rank1_coherency(&pauli_vector(s)));
    Ok(window_mean(&rank1, window))
}

/// Shrinking-window mean over any grid of coherency matrices. Windows
/// larger than the raster are allowed here and collapse to the global mean.
pub fn window_mean(grid: &Grid<CoherencyMatrix>, window: usize) -> Grid<CoherencyMatrix> {
    let (h, w) = (grid.height(), grid.width());
    let half = window / 2;

    // Horizontal pass: running sums over valid columns.
    let rows: Vec<Vec<CoherencyMatrix>> = (0..h)
        .into_par_iter()
        .map(|r| {
            (0..w)
                .map(|c| {
                    let lo = c.saturating_sub(half);
                    let hi = (c + half).min(w - 1);
                    (lo..=hi).fold(CoherencyMatrix::ZERO, |acc, cc| acc.add(grid.get(r, cc)))
                })
                .collect()
        })
        .collect();

    let out: Vec<CoherencyMatrix> = (0..h)
        .into_par_iter()
        .flat_map_iter(|r| {
            let rlo = r.saturating_sub(half);
            let rhi = (r + half).min(h - 1);
            let rows = &rows;
            (0..w).map(move |c| {
                let clo = c.saturating_sub(half);
                let chi = (c + half).min(w - 1);
                let count = ((rhi - rlo + 1) * (chi - clo + 1)) as f64;
                (rlo..=rhi).fold(CoherencyMatrix::ZERO, |acc, rr| acc.add(&rows[rr][c])).scaled(1.0 / count)
            })
        })
        .collect();
    Grid::from_vec(h, w, out).expect("geometry preserved")
}

/// Total power of one pixel over all four channels.
pub fn span_pixel(s: &ScatteringMatrix) -> f64 {
    s.channels().iter().map(|c| c.norm_sqr()).sum()
}

pub fn span_raster(raster: &PolsarRaster) -> Grid<f64> {
    raster.pixels.map(span_pixel)
}
