//! The ten-component scattering basis library, the forward synthesis oracle
//! and predicted-power reconstruction.
//!
//! Every basis is a unit-trace Hermitian PSD coherency matrix, so the total
//! power of a mixture is simply the sum of its component powers.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::polsar::CoherencyMatrix;

/// Seed of the adaptive basis. Part of the artifact format version.
pub const ADAPTIVE_SEED: u64 = 0x5eed_ada9_7100_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisKind {
    Surface,
    DoubleBounce,
    Volume,
    Helix,
    OrientedDipole,
    CompoundDipole,
    MixedDipole,
    RotatedDihedral,
    RollInvariantCrossPol,
    Adaptive,
}

impl BasisKind {
    pub const ALL: [BasisKind; 10] = [
        BasisKind::Surface,
        BasisKind::DoubleBounce,
        BasisKind::Volume,
        BasisKind::Helix,
        BasisKind::OrientedDipole,
        BasisKind::CompoundDipole,
        BasisKind::MixedDipole,
        BasisKind::RotatedDihedral,
        BasisKind::RollInvariantCrossPol,
        BasisKind::Adaptive,
    ];

    /// The four mechanisms of the Yamaguchi model, in S.F./Dbl/Vol/Hlx order.
    pub const YAMAGUCHI: [BasisKind; 4] =
        [BasisKind::Surface, BasisKind::DoubleBounce, BasisKind::Volume, BasisKind::Helix];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BasisKind::Surface => "s",
            BasisKind::DoubleBounce => "d",
            BasisKind::Volume => "v",
            BasisKind::Helix => "h",
            BasisKind::OrientedDipole => "od",
            BasisKind::CompoundDipole => "cd",
            BasisKind::MixedDipole => "md",
            BasisKind::RotatedDihedral => "rdsm",
            BasisKind::RollInvariantCrossPol => "ricp",
            BasisKind::Adaptive => "a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringBasis {
    pub kind: BasisKind,
    pub matrix: CoherencyMatrix,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn basis_matrix(kind: BasisKind) -> ScatteringBasis {
    let matrix = match kind {
        BasisKind::Surface => CoherencyMatrix::diag(1.0, 0.0, 0.0),
        BasisKind::DoubleBounce => CoherencyMatrix::diag(0.0, 1.0, 0.0),
        BasisKind::Volume => CoherencyMatrix::diag(0.5, 0.25, 0.25),
        BasisKind::Helix => CoherencyMatrix { t22: 0.5, t33: 0.5, t23: c(0.0, 0.5), ..CoherencyMatrix::ZERO },
        BasisKind::OrientedDipole => CoherencyMatrix { t11: 0.5, t33: 0.5, t13: c(0.5, 0.0), ..CoherencyMatrix::ZERO },
        BasisKind::CompoundDipole => CoherencyMatrix { t11: 0.5, t33: 0.5, t13: c(0.0, -0.5), ..CoherencyMatrix::ZERO },
        BasisKind::MixedDipole => CoherencyMatrix { t22: 0.5, t33: 0.5, t23: c(0.5, 0.0), ..CoherencyMatrix::ZERO },
        BasisKind::RotatedDihedral => {
            CoherencyMatrix { t22: 0.5, t33: 0.5, t23: c(-0.5, 0.0), ..CoherencyMatrix::ZERO }
        }
        BasisKind::RollInvariantCrossPol => CoherencyMatrix::diag(0.0, 0.0, 1.0),
        BasisKind::Adaptive => adaptive_matrix(ADAPTIVE_SEED),
    };
    ScatteringBasis { kind, matrix }
}

/// `A A^H / tr(A A^H)` for a seeded complex Gaussian `A`.
fn adaptive_matrix(seed: u64) -> CoherencyMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = [[c(0.0, 0.0); 3]; 3];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v = c(re, im);
        }
    }
    let mut g = [[c(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = (0..3).map(|k| a[i][k] * a[j][k].conj()).sum();
        }
    }
    let m = CoherencyMatrix::from_full(&g);
    m.scaled(1.0 / m.trace())
}

/// Ten non-negative component powers, indexed by [`BasisKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TenPowers(pub [f64; 10]);

impl TenPowers {
    pub fn uniform(p: f64) -> Self {
        Self([p; 10])
    }

    pub fn one_hot(kind: BasisKind, p: f64) -> Self {
        let mut out = [0.0; 10];
        out[kind.index()] = p;
        Self(out)
    }

    pub fn with(mut self, kind: BasisKind, p: f64) -> Self {
        self.0[kind.index()] = p;
        self
    }

    pub fn get(&self, kind: BasisKind) -> f64 {
        self.0[kind.index()]
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|p| p.is_finite() && *p >= 0.0)
    }
}

/// Forward model: `sum_i p_i * basis_i`.
pub fn synthesize_pixel(powers: &TenPowers) -> CoherencyMatrix {
    BasisKind::ALL
        .iter()
        .zip(powers.0.iter())
        .filter(|(_, p)| **p != 0.0)
        .fold(CoherencyMatrix::ZERO, |acc, (k, p)| acc.add(&basis_matrix(*k).matrix.scaled(*p)))
}

/// Total power implied by a set of component powers.
pub fn reconstruct_power(powers: &TenPowers) -> f64 {
    powers.0.iter().sum()
}

#[derive(Debug, Serialize)]
struct BasisEntry {
    kind: BasisKind,
    /// Row-major 3x3 entries as `[re, im]` pairs.
    matrix: Vec<Vec<[f64; 2]>>,
}

/// JSON export of the full basis set, kind -> 3x3 complex entries.
pub fn export_bases_json() -> serde_json::Value {
    let entries: Vec<BasisEntry> = BasisKind::ALL
        .iter()
        .map(|&kind| {
            let full = basis_matrix(kind).matrix.to_full();
            BasisEntry { kind, matrix: full.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect() }
        })
        .collect();
    serde_json::json!({ "format": "scattering-bases", "version": 1, "bases": entries })
}
