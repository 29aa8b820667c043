//! Rayleigh statistics of component power maps and their equiprobability
//! quantization into binary pseudo-labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::yamaguchi::ComponentStack;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("need at least 2 positive samples to fit a Rayleigh scale, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Cumulative probabilities reported alongside a fit.
pub const QUARTILE_PROBS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighFit {
    pub mu: f64,
    /// Values at cumulative probability 1/4, 1/2, 3/4.
    pub quartiles: [f64; 3],
    /// Positive samples used.
    pub n: usize,
    /// Non-positive samples excluded from the fit.
    pub dropped: usize,
}

/// Inverse CDF of a Rayleigh distribution with scale `mu`.
pub fn rayleigh_quantile(mu: f64, p: f64) -> f64 {
    mu * (-2.0 * (1.0 - p).ln()).sqrt()
}

/// Fixed-order pairwise summation; the same input always reduces the same way.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Maximum-likelihood scale `sqrt(sum x^2 / 2n)` over the positive samples.
pub fn fit_rayleigh(samples: &[f64]) -> Result<RayleighFit, LabelError> {
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(LabelError::NonFinite(i));
    }
    let squares: Vec<f64> = samples.iter().filter(|x| **x > 0.0).map(|x| x * x).collect();
    let n = squares.len();
    if n < 2 {
        return Err(LabelError::TooFewSamples(n));
    }
    let mu = (pairwise_sum(&squares) / (2.0 * n as f64)).sqrt();
    Ok(RayleighFit { mu, quartiles: QUARTILE_PROBS.map(|p| rayleigh_quantile(mu, p)), n, dropped: samples.len() - n })
}

/// Rayleigh median `mu * sqrt(2 ln 2)`.
pub fn median_threshold(fit: &RayleighFit) -> f64 {
    fit.mu * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// 0 below `theta`, 1 at or above it.
pub fn binarize_component(values: &Grid<f64>, theta: f64) -> Grid<u8> {
    values.map(|v| u8::from(*v >= theta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabelStats {
    pub name: String,
    pub fit: Option<RayleighFit>,
    pub threshold: Option<f64>,
    pub positive_fraction: f64,
    pub warning: Option<String>,
}

/// Four binary masks (S.F., Dbl, Vol, Hlx) and the statistics behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLabelStack {
    pub masks: [Grid<u8>; 4],
    pub stats: [ComponentLabelStats; 4],
}

impl BinaryLabelStack {
    pub fn height(&self) -> usize {
        self.masks[0].height()
    }

    pub fn width(&self) -> usize {
        self.masks[0].width()
    }

    pub fn thresholds(&self) -> [Option<f64>; 4] {
        [0, 1, 2, 3].map(|i| self.stats[i].threshold)
    }
}

/// Per-scene fit, median threshold and binarization of each component.
/// A component with fewer than two positive values yields an all-zero mask
/// and a warning instead of failing the scene.
pub fn generate_labels(stack: &ComponentStack) -> BinaryLabelStack {
    let mut masks = Vec::with_capacity(4);
    let mut stats = Vec::with_capacity(4);
    for (plane, name) in stack.planes.iter().zip(ComponentStack::NAMES) {
        match fit_rayleigh(plane.as_slice()) {
            Ok(fit) => {
                let theta = median_threshold(&fit);
                let mask = binarize_component(plane, theta);
                let ones = mask.iter().filter(|v| **v == 1).count();
                stats.push(ComponentLabelStats {
                    name: name.to_string(),
                    fit: Some(fit),
                    threshold: Some(theta),
                    positive_fraction: ones as f64 / mask.len() as f64,
                    warning: None,
                });
                masks.push(mask);
            }
            Err(e) => {
                log::warn!("{name}: {e}; emitting an all-zero mask");
                stats.push(ComponentLabelStats {
                    name: name.to_string(),
                    fit: None,
                    threshold: None,
                    positive_fraction: 0.0,
                    warning: Some(e.to_string()),
                });
                masks.push(Grid::filled(plane.height(), plane.width(), 0));
            }
        }
    }
    BinaryLabelStack { masks: masks.try_into().expect("four masks"), stats: stats.try_into().expect("four stats") }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Inverse-CDF Rayleigh sampler.
    fn rayleigh(rng: &mut impl Rng, mu: f64) -> f64 {
        let u: f64 = rng.gen();
        mu * (-2.0 * (1.0 - u).ln()).sqrt()
    }

    #[test]
    fn closed_form_fit() {
        let fit = fit_rayleigh(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((fit.mu - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(fit.n, 4);
        for (q, p) in fit.quartiles.iter().zip(QUARTILE_PROBS) {
            assert!((q - fit.mu * (-2.0 * (1.0 - p).ln()).sqrt()).abs() <= 1e-12);
        }
        assert!(fit.quartiles[0] < fit.quartiles[1] && fit.quartiles[1] < fit.quartiles[2]);
    }

    #[test]
    fn fit_errors_and_drops() {
        assert_eq!(fit_rayleigh(&[3.0]), Err(LabelError::TooFewSamples(1)));
        assert_eq!(fit_rayleigh(&[0.0, 0.0, 2.0]), Err(LabelError::TooFewSamples(1)));
        assert_eq!(fit_rayleigh(&[1.0, f64::NAN]), Err(LabelError::NonFinite(1)));
        let fit = fit_rayleigh(&[0.0, 2.0, 2.0]).unwrap();
        assert_eq!((fit.n, fit.dropped), (2, 1));
    }

    #[test]
    fn median_values() {
        let fit =
            |mu: f64| RayleighFit { mu, quartiles: QUARTILE_PROBS.map(|p| rayleigh_quantile(mu, p)), n: 2, dropped: 0 };
        assert!((median_threshold(&fit(1.0)) - 1.177_410_022_515_474_7).abs() < 1e-12);
        assert!((median_threshold(&fit(2.0)) - 2.354_820_045_030_949_4).abs() < 1e-12);
        assert!((median_threshold(&fit(1.0)) - rayleigh_quantile(1.0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn empirical_median_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = (2.0 * std::f64::consts::LN_2).sqrt();
        let n = 1_000_000;
        let below = (0..n).filter(|_| rayleigh(&mut rng, 1.0) < theta).count();
        let frac = below as f64 / n as f64;
        assert!((0.497..=0.503).contains(&frac), "{frac}");
    }

    #[test]
    fn binarize_boundary_and_loop() {
        let g = Grid::from_vec(2, 3, vec![0.0, 1.0, 0.999, 1.5, 2.0, 1.0 - 1e-15]).unwrap();
        let m = binarize_component(&g, 1.0);
        assert_eq!(m.as_slice(), &[0, 1, 0, 1, 1, 0]);
        let z = binarize_component(&Grid::filled(3, 3, 0.0), 1.0);
        assert!(z.iter().all(|v| *v == 0));
    }

    #[test]
    fn constant_component_is_all_ones() {
        let c = 3.7;
        let fit = fit_rayleigh(&[c; 16]).unwrap();
        let theta = median_threshold(&fit);
        // theta = c * sqrt(ln 2) < c
        assert!(c >= theta);
        let plane = Grid::filled(4, 4, c);
        let stack = ComponentStack::new([plane.clone(), plane.clone(), plane.clone(), plane]).unwrap();
        let labels = generate_labels(&stack);
        assert!(labels.masks.iter().all(|m| m.iter().all(|v| *v == 1)));
    }

    #[test]
    fn degenerate_component_warns() {
        let ones = Grid::filled(3, 3, 1.0);
        let zeros = Grid::filled(3, 3, 0.0);
        let stack = ComponentStack::new([ones.clone(), zeros, ones.clone(), ones]).unwrap();
        let labels = generate_labels(&stack);
        assert!(labels.stats[1].warning.is_some());
        assert!(labels.stats[1].threshold.is_none());
        assert!(labels.masks[1].iter().all(|v| *v == 0));
        assert!(labels.stats[0].warning.is_none());
    }

    #[test]
    fn masks_are_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..400).map(|_| rayleigh(&mut rng, 0.8)).collect();
        let g = Grid::from_vec(20, 20, vals.clone()).unwrap();
        let base = binarize_component(&g, median_threshold(&fit_rayleigh(&vals).unwrap()));
        for c in [1e-3, 0.5, 4.0, 1e4] {
            let scaled: Vec<f64> = vals.iter().map(|v| v * c).collect();
            let theta = median_threshold(&fit_rayleigh(&scaled).unwrap());
            let m = binarize_component(&g.map(|v| v * c), theta);
            assert_eq!(m, base, "scale {c}");
        }
    }
}
