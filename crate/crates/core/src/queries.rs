//! Scattering query initialization from the basis matrices, and the pairwise
//! cosine report used to check that the queries stay independent.
//!
//! For each basis, `m` probe vectors `Y` are drawn and paired with `X = T Y`.
//! Each pair is flattened to 12 reals and mapped through a fixed seeded
//! random projection followed by `sin`, an odd nonlinearity, so the zero pair
//! embeds to zero. Probes are drawn around a fixed mean direction rather
//! than isotropically: the embedding is odd, so an isotropic probe
//! distribution would average every basis to the same zero vector.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bases::{basis_matrix, BasisKind, ScatteringBasis};

pub const EMBED_DIM: usize = 768;
pub const QUERY_DIM: usize = 256;
pub const PAIR_DIM: usize = 12;
/// Default number of sample pairs per basis.
pub const DEFAULT_M: usize = 64;
/// Seed of the shipped query set.
pub const DEFAULT_SEED: u64 = 20_250_101;
/// Version of the embedding recipe; bump when any constant below changes.
pub const EMBEDDING_VERSION: u32 = 1;

const EMBED_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
const MATCH_SEED: u64 = 0xc2b2_ae3d_27d4_eb4f;
/// Frequency scale of the random features.
const BANDWIDTH: f64 = 8.0;
/// Spread of the probe vectors around the mean direction.
const PROBE_SPREAD: f64 = 0.2;
const PROBE_MEAN: [[f64; 2]; 3] = [[0.62, 0.11], [-0.35, 0.47], [0.28, -0.43]];
/// Largest off-diagonal |cos| accepted as "independent".
pub const SEPARATION_LIMIT: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("sample count m must be >= 1")]
    ZeroSamples,
    #[error("independence report needs at least 2 vectors, got {0}")]
    TooFewQueries(usize),
    #[error("vectors have mismatched dimensions")]
    DimensionMismatch,
}

/// One `(Y, X)` probe with `X = T Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePair {
    pub y: [Complex64; 3],
    pub x: [Complex64; 3],
}

impl SamplePair {
    pub fn to_reals(&self) -> [f64; PAIR_DIM] {
        let mut out = [0.0; PAIR_DIM];
        for i in 0..3 {
            out[i] = self.y[i].re;
            out[3 + i] = self.y[i].im;
            out[6 + i] = self.x[i].re;
            out[9 + i] = self.x[i].im;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringQuery {
    pub kind: BasisKind,
    pub vec768: Vec<f64>,
    pub vec256: Vec<f64>,
    pub seed: u64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub labels: Vec<String>,
    pub cosine: Vec<Vec<f64>>,
    pub max_off_diagonal: f64,
    pub independent: bool,
}

fn gaussian_matrix(seed: u64, rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        })
        .collect()
}

fn embed_weights() -> &'static [f64] {
    static W: OnceLock<Vec<f64>> = OnceLock::new();
    W.get_or_init(|| gaussian_matrix(EMBED_SEED, EMBED_DIM, PAIR_DIM, BANDWIDTH))
}

fn match_weights() -> &'static [f64] {
    static P: OnceLock<Vec<f64>> = OnceLock::new();
    P.get_or_init(|| gaussian_matrix(MATCH_SEED, QUERY_DIM, EMBED_DIM, 1.0 / (EMBED_DIM as f64).sqrt()))
}

fn probe_mean() -> [Complex64; 3] {
    let v = PROBE_MEAN.map(|[re, im]| Complex64::new(re, im));
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

/// Draws `m` unit-norm probes (seeded; each basis kind uses its own stream)
/// and pairs them with `X = T Y`.
pub fn sample_pairs(basis: &ScatteringBasis, m: usize, seed: u64) -> Result<Vec<SamplePair>, QueryError> {
    if m == 0 {
        return Err(QueryError::ZeroSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(basis.kind.index() as u64);
    let mean = probe_mean();
    Ok((0..m)
        .map(|_| {
            let mut y = mean;
            for yi in y.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *yi += Complex64::new(re, im) * (PROBE_SPREAD * std::f64::consts::FRAC_1_SQRT_2);
            }
            let n = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let y = y.map(|z| z / n);
            SamplePair { y, x: basis.matrix.mul_vec(&y) }
        })
        .collect())
}

/// `sin(W f)` for the 12-real serialization `f` of the pair.
pub fn embed_pair(pair: &SamplePair) -> Vec<f64> {
    let f = pair.to_reals();
    embed_weights()
        .chunks_exact(PAIR_DIM)
        .map(|row| row.iter().zip(f.iter()).map(|(w, x)| w * x).sum::<f64>().sin())
        .collect()
}

/// Fixed 768 -> 256 projection followed by unit normalization.
pub fn match_projection(vec768: &[f64]) -> Vec<f64> {
    let v: Vec<f64> =
        match_weights().chunks_exact(EMBED_DIM).map(|row| row.iter().zip(vec768).map(|(p, x)| p * x).sum()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

pub fn init_query(basis: &ScatteringBasis, m: usize, seed: u64) -> Result<ScatteringQuery, QueryError> {
    let pairs = sample_pairs(basis, m, seed)?;
    let mut vec768 = vec![0.0; EMBED_DIM];
    for p in &pairs {
        for (acc, e) in vec768.iter_mut().zip(embed_pair(p)) {
            *acc += e;
        }
    }
    for v in vec768.iter_mut() {
        *v /= m as f64;
    }
    let vec256 = match_projection(&vec768);
    Ok(ScatteringQuery { kind: basis.kind, vec768, vec256, seed, m })
}

/// All ten queries for a given seed and sample count.
pub fn query_set(m: usize, seed: u64) -> Result<Vec<ScatteringQuery>, QueryError> {
    BasisKind::ALL.iter().map(|k| init_query(&basis_matrix(*k), m, seed)).collect()
}

/// The shipped query set (`DEFAULT_M`, `DEFAULT_SEED`).
pub fn shipped_queries() -> Vec<ScatteringQuery> {
    query_set(DEFAULT_M, DEFAULT_SEED).expect("m > 0")
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn independence_report_vectors(
    labels: Vec<String>,
    vectors: &[Vec<f64>],
) -> Result<IndependenceReport, QueryError> {
    let n = vectors.len();
    if n < 2 {
        return Err(QueryError::TooFewQueries(n));
    }
    if vectors.iter().any(|v| v.len() != vectors[0].len()) {
        return Err(QueryError::DimensionMismatch);
    }
    let mut cos = vec![vec![0.0; n]; n];
    let mut max_off: f64 = 0.0;
    for i in 0..n {
        cos[i][i] = 1.0;
        for j in i + 1..n {
            let c = cosine(&vectors[i], &vectors[j]);
            cos[i][j] = c;
            cos[j][i] = c;
            max_off = max_off.max(c.abs());
        }
    }
    Ok(IndependenceReport { labels, cosine: cos, max_off_diagonal: max_off, independent: max_off < SEPARATION_LIMIT })
}

/// Pairwise cosines of the 256-dim query vectors.
pub fn independence_report(queries: &[ScatteringQuery]) -> Result<IndependenceReport, QueryError> {
    let labels = queries.iter().map(|q| format!("{:?}", q.kind)).collect();
    let vecs: Vec<Vec<f64>> = queries.iter().map(|q| q.vec256.clone()).collect();
    independence_report_vectors(labels, &vecs)
}
