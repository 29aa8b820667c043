use serde::{Deserialize, Serialize};

use super::PretrainError;
use crate::autodiff::Matrix;
use crate::yamaguchi::ComponentStack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub name: String,
    /// Percent of correctly classified cells.
    pub oa: f64,
    /// Mean IoU over the classes present in prediction or labels, percent.
    pub miou: f64,
    /// Mean per-class accuracy over the classes present in the labels, percent.
    pub macc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub components: Vec<ComponentMetrics>,
}

impl EvalMetrics {
    pub fn min_oa(&self) -> f64 {
        self.components.iter().map(|c| c.oa).fold(f64::INFINITY, f64::min)
    }
}

/// Thresholds `probs` (`4 x T`) at 0.5 and scores each row against `labels`.
pub fn eval_metrics(probs: &Matrix, labels: &Matrix) -> Result<EvalMetrics, PretrainError> {
    if probs.dim() != labels.dim() || probs.nrows() != 4 {
        return Err(PretrainError::Shape(format!("predictions {:?} vs labels {:?}", probs.dim(), labels.dim())));
    }
    let components = ComponentStack::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            // conf[label][pred]
            let mut conf = [[0usize; 2]; 2];
            for (p, y) in probs.row(k).iter().zip(labels.row(k)) {
                conf[usize::from(*y >= 0.5)][usize::from(*p >= 0.5)] += 1;
            }
            let total = conf[0][0] + conf[0][1] + conf[1][0] + conf[1][1];
            let oa = 100.0 * (conf[0][0] + conf[1][1]) as f64 / total.max(1) as f64;
            let (mut iou, mut n_iou, mut acc, mut n_acc) = (0.0, 0, 0.0, 0);
            for c in 0..2 {
                let tp = conf[c][c];
                let support = conf[c][0] + conf[c][1];
                let union = support + conf[1 - c][c];
                if union > 0 {
                    iou += tp as f64 / union as f64;
                    n_iou += 1;
                }
                if support > 0 {
                    acc += tp as f64 / support as f64;
                    n_acc += 1;
                }
            }
            ComponentMetrics {
                name: name.to_string(),
                oa,
                miou: if n_iou > 0 { 100.0 * iou / n_iou as f64 } else { 100.0 },
                macc: if n_acc > 0 { 100.0 * acc / n_acc as f64 } else { 100.0 },
            }
        })
        .collect();
    Ok(EvalMetrics { components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_inverted() {
        let y = Array2::from_shape_fn((4, 9), |(i, j)| ((i * j + j) % 2) as f64);
        let m = eval_metrics(&y, &y).unwrap();
        assert!(m.components.iter().all(|c| c.oa == 100.0 && c.miou == 100.0 && c.macc == 100.0));
        let inv = y.mapv(|v| 1.0 - v);
        let m = eval_metrics(&inv, &y).unwrap();
        assert!(m.components.iter().all(|c| c.oa == 0.0 && c.miou == 0.0));
        assert!(eval_metrics(&Array2::zeros((3, 9)), &Array2::zeros((3, 9))).is_err());
    }

    #[test]
    fn matches_confusion_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = Array2::from_shape_fn((4, 50), |_| rng.gen_range(0.0..1.0));
        let y = Array2::from_shape_fn((4, 50), |_| f64::from(u8::from(rng.gen_bool(0.4))));
        let m = eval_metrics(&p, &y).unwrap();
        for k in 0..4 {
            let (mut tp, mut tn, mut fp, mut fneg) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..50 {
                let pred = p[[k, j]] >= 0.5;
                let lab = y[[k, j]] == 1.0;
                match (lab, pred) {
                    (true, true) => tp += 1.0,
                    (false, false) => tn += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fneg += 1.0,
                }
            }
            let oa = 100.0 * (tp + tn) / 50.0;
            let miou = 100.0 * (tp / (tp + fp + fneg) + tn / (tn + fp + fneg)) / 2.0;
            let macc = 100.0 * (tp / (tp + fneg) + tn / (tn + fp)) / 2.0;
            let c = &m.components[k];
            assert!((c.oa - oa).abs() < 1e-12);
            assert!((c.miou - miou).abs() < 1e-12);
            assert!((c.macc - macc).abs() < 1e-12);
        }
    }
}
