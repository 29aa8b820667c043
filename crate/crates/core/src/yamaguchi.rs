//! Yamaguchi four-component decomposition of coherency matrices into
//! surface, double-bounce, volume and helix powers.
//!
//! The volume model is selected from the co-pol power ratio: within +/-2 dB
//! the balanced `(1/4) diag(2, 1, 1)` model is used, otherwise the
//! asymmetric `(1/30) [[15, +/-5, 0], [+/-5, 7, 0], [0, 0, 8]]` one. Helix
//! power comes from `Im T23`, and the remaining 2x2 block is split between
//! surface and double bounce by comparing its diagonal.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::polsar::CoherencyMatrix;

/// Branch threshold on `10 log10(Pvv / Phh)`, in dB.
pub const BRANCH_DB: f64 = 2.0;
/// Division guard relative to the pixel trace.
pub const GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VolumeBranch {
    VvDominant,
    Balanced,
    HhDominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YamaguchiPowers {
    pub ps: f64,
    pub pd: f64,
    pub pv: f64,
    pub ph: f64,
    pub branch: VolumeBranch,
    pub clipped: bool,
}

impl YamaguchiPowers {
    pub fn total(&self) -> f64 {
        self.ps + self.pd + self.pv + self.ph
    }

    /// Powers in S.F./Dbl/Vol/Hlx order.
    pub fn as_array(&self) -> [f64; 4] {
        [self.ps, self.pd, self.pv, self.ph]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    pub branch: VolumeBranch,
    pub pv: f64,
    /// Pv had to be clamped into `[0, trace - Ph]`.
    pub clamped: bool,
    /// Phh or Pvv was non-positive and the branch fell back to Balanced.
    pub degenerate_ratio: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDouble {
    pub ps: f64,
    pub pd: f64,
    pub clipped: bool,
}

/// `2 |Im T23|`, capped at the trace.
pub fn helix_power(t: &CoherencyMatrix) -> f64 {
    (2.0 * t.t23.im.abs()).min(t.trace().max(0.0))
}

pub fn volume_matrix(branch: VolumeBranch) -> CoherencyMatrix {
    match branch {
        VolumeBranch::Balanced => CoherencyMatrix::diag(0.5, 0.25, 0.25),
        VolumeBranch::HhDominant => CoherencyMatrix {
            t12: Complex64::new(5.0 / 30.0, 0.0),
            ..CoherencyMatrix::diag(15.0 / 30.0, 7.0 / 30.0, 8.0 / 30.0)
        },
        VolumeBranch::VvDominant => CoherencyMatrix {
            t12: Complex64::new(-5.0 / 30.0, 0.0),
            ..CoherencyMatrix::diag(15.0 / 30.0, 7.0 / 30.0, 8.0 / 30.0)
        },
    }
}

/// Unit-power helix model whose `T23` sign follows `Im T23` of the pixel.
pub fn helix_matrix(im_t23: f64) -> CoherencyMatrix {
    let sign = if im_t23 < 0.0 { -1.0 } else { 1.0 };
    CoherencyMatrix { t23: Complex64::new(0.0, 0.5 * sign), ..CoherencyMatrix::diag(0.0, 0.5, 0.5) }
}

pub fn volume_branch(t: &CoherencyMatrix, ph: f64) -> VolumeEstimate {
    let phh = 0.5 * (t.t11 + t.t22 + 2.0 * t.t12.re);
    let pvv = 0.5 * (t.t11 + t.t22 - 2.0 * t.t12.re);
    let (branch, degenerate_ratio) = if phh <= 0.0 || pvv <= 0.0 {
        (VolumeBranch::Balanced, true)
    } else {
        let ratio_db = 10.0 * (pvv / phh).log10();
        let b = if ratio_db > BRANCH_DB {
            VolumeBranch::VvDominant
        } else if ratio_db < -BRANCH_DB {
            VolumeBranch::HhDominant
        } else {
            VolumeBranch::Balanced
        };
        (b, false)
    };
    let raw = match branch {
        VolumeBranch::Balanced => 2.0 * (2.0 * t.t33 - ph),
        _ => 15.0 / 8.0 * (2.0 * t.t33 - ph),
    };
    let upper = (t.trace() - ph).max(0.0);
    let pv = raw.clamp(0.0, upper);
    VolumeEstimate { branch, pv, clamped: (pv - raw).abs() > GUARD * t.trace().abs(), degenerate_ratio }
}

/// Splits the remainder left after removing the volume and helix terms.
pub fn surface_double(t: &CoherencyMatrix, pv: f64, branch: VolumeBranch, ph: f64) -> SurfaceDouble {
    let rem = t.sub(&volume_matrix(branch).scaled(pv)).sub(&helix_matrix(t.t23.im).scaled(ph));
    let (s, d, c) = (rem.t11, rem.t22, rem.t12);
    let guard = GUARD * t.trace().abs();
    if s <= guard && d <= guard {
        return SurfaceDouble { ps: 0.0, pd: 0.0, clipped: s < -guard || d < -guard };
    }
    let c2 = c.norm_sqr();
    let (mut ps, mut pd) = if s >= d { (s + c2 / s, d - c2 / s) } else { (s - c2 / d, d + c2 / d) };
    // Round-off below the guard is zeroed without raising the flag.
    let mut clipped = false;
    if pd < 0.0 {
        clipped |= pd < -guard;
        ps += pd;
        pd = 0.0;
    }
    if ps < 0.0 {
        clipped |= ps < -guard;
        pd = (pd + ps).max(0.0);
        ps = 0.0;
    }
    SurfaceDouble { ps, pd, clipped }
}

pub fn yamaguchi_decompose(t: &CoherencyMatrix) -> YamaguchiPowers {
    let mut clipped = false;
    let mut ph = helix_power(t);
    // The helix term carries Ph/2 of T33; more than that would leave a
    // negative cross-pol remainder and break power conservation.
    let cap = 2.0 * t.t33.max(0.0);
    if ph > cap {
        clipped = ph - cap > GUARD * t.trace().abs();
        ph = cap;
    }
    let vol = volume_branch(t, ph);
    clipped |= vol.clamped || vol.degenerate_ratio && t.trace() > 0.0;
    let sd = surface_double(t, vol.pv, vol.branch, ph);
    clipped |= sd.clipped;
    YamaguchiPowers { ps: sd.ps, pd: sd.pd, pv: vol.pv, ph, branch: vol.branch, clipped }
}

/// The four Yamaguchi component power grids of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentStack {
    /// S.F., Dbl, Vol, Hlx.
    pub planes: [Grid<f64>; 4],
}

impl ComponentStack {
    pub const NAMES: [&'static str; 4] = ["surface", "double_bounce", "volume", "helix"];

    pub fn new(planes: [Grid<f64>; 4]) -> Option<Self> {
        let ok = planes.iter().all(|p| p.same_shape(&planes[0])) && planes.iter().all(|p| p.iter().all(|v| *v >= 0.0));
        ok.then_some(Self { planes })
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub vv_dominant: usize,
    pub balanced: usize,
    pub hh_dominant: usize,
    pub clipped: usize,
}

pub fn decompose_raster(grid: &Grid<CoherencyMatrix>) -> (ComponentStack, DecompositionStats) {
    let powers: Vec<YamaguchiPowers> = grid.as_slice().par_iter().map(yamaguchi_decompose).collect();
    let mut stats = DecompositionStats::default();
    for p in &powers {
        match p.branch {
            VolumeBranch::VvDominant => stats.vv_dominant += 1,
            VolumeBranch::Balanced => stats.balanced += 1,
            VolumeBranch::HhDominant => stats.hh_dominant += 1,
        }
        stats.clipped += usize::from(p.clipped);
    }
    let (h, w) = (grid.height(), grid.width());
    let plane = |i: usize| Grid::from_vec(h, w, powers.iter().map(|p| p.as_array()[i]).collect()).expect("geometry");
    let stack = ComponentStack { planes: [plane(0), plane(1), plane(2), plane(3)] };
    (stack, stats)
}
