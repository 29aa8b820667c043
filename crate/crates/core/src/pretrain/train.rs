use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_power, loss_yamaguchi, total_loss};
use super::metrics::{eval_metrics, EvalMetrics};
use super::model::{patchify, raster_channels, DecoderConfig, EncoderConfig, ModelParams};
use super::PretrainError;
use crate::autodiff::{Matrix, Tape};
use crate::labels::{generate_labels, BinaryLabelStack};
use crate::polsar::{boxcar_coherency, span_raster, PolsarRaster};
use crate::yamaguchi::decompose_raster;

/// Total loss above which training aborts.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub lr: f64,
    pub iters: usize,
    /// Scenes per iteration; 0 uses every scene.
    pub batch: usize,
    /// Seeds the scene order when `batch` is smaller than the scene set.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { alpha: 0.1, lr: 1e-2, iters: 500, batch: 0, seed: 7 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PretrainError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(PretrainError::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(PretrainError::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// One scene at token resolution: patch tokens, majority-voted labels and
/// window-mean SPAN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingScene {
    /// `T x 8 p^2`.
    pub tokens: Matrix,
    /// `4 x T`, entries 0 or 1.
    pub labels: Matrix,
    /// `1 x T`.
    pub span: Matrix,
    pub grid_height: usize,
    pub grid_width: usize,
}

impl TrainingScene {
    pub fn new(raster: &PolsarRaster, labels: &BinaryLabelStack, patch: usize) -> Result<Self, PretrainError> {
        if labels.height() != raster.height() || labels.width() != raster.width() {
            return Err(PretrainError::Shape("labels and raster differ in size".into()));
        }
        let tokens = patchify(&raster_channels(raster), patch)?;
        let (gh, gw) = (raster.height() / patch, raster.width() / patch);
        let mut lab = Array2::zeros((4, gh * gw));
        for (k, mask) in labels.masks.iter().enumerate() {
            let down = mask.block_majority(patch).expect("patch divides extent");
            for (j, v) in down.iter().enumerate() {
                lab[[k, j]] = f64::from(*v);
            }
        }
        let span = span_raster(raster).block_mean(patch).expect("patch divides extent");
        let span = Array2::from_shape_vec((1, gh * gw), span.into_vec()).expect("token count");
        Ok(Self { tokens, labels: lab, span, grid_height: gh, grid_width: gw })
    }

    /// Runs coherency estimation, decomposition and label generation, then
    /// builds the scene.
    pub fn from_raster(raster: &PolsarRaster, window: usize, patch: usize) -> Result<Self, PretrainError> {
        let t = boxcar_coherency(raster, window).map_err(|e| PretrainError::Config(e.to_string()))?;
        let (stack, _) = decompose_raster(&t);
        Self::new(raster, &generate_labels(&stack), patch)
    }

    pub fn token_count(&self) -> usize {
        self.tokens.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iter: usize,
    pub total: f64,
    pub yamaguchi: f64,
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<LossRecord>,
}

impl TrainOutcome {
    /// Trailing moving average of the total loss.
    pub fn smoothed_total(&self, window: usize) -> Vec<f64> {
        let totals: Vec<f64> = self.trace.iter().map(|r| r.total).collect();
        totals.windows(window.max(1)).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect()
    }
}

fn batch_losses(
    params: &ModelParams,
    scenes: &[&TrainingScene],
    alpha: f64,
) -> Result<(Tape, Vec<crate::autodiff::Var>, [crate::autodiff::Var; 3]), PretrainError> {
    let mut tape = Tape::new();
    let tokens = ndarray::concatenate(Axis(0), &scenes.iter().map(|s| s.tokens.view()).collect::<Vec<_>>())
        .map_err(|e| PretrainError::Shape(e.to_string()))?;
    let labels = ndarray::concatenate(Axis(1), &scenes.iter().map(|s| s.labels.view()).collect::<Vec<_>>())
        .map_err(|e| PretrainError::Shape(e.to_string()))?;
    let span = ndarray::concatenate(Axis(1), &scenes.iter().map(|s| s.span.view()).collect::<Vec<_>>())
        .map_err(|e| PretrainError::Shape(e.to_string()))?;
    let fwd = params.forward(&mut tape, &tokens)?;
    let ly = loss_yamaguchi(&mut tape, fwd.heads.yamaguchi_logits, &labels)?;
    let (_, lp) = loss_power(&mut tape, fwd.heads.decomposition, &span)?;
    let total = total_loss(&mut tape, ly, lp, alpha)?;
    Ok((tape, fwd.params, [total, ly, lp]))
}

/// Plain gradient descent over every parameter. Scenes in a batch are
/// processed as one token set, so the attention of each query spans the
/// whole batch.
pub fn train(
    scenes: &[TrainingScene],
    encoder: EncoderConfig,
    decoder: DecoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, PretrainError> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(PretrainError::Config("no training scenes".into()));
    }
    let mut params = ModelParams::init(encoder, decoder)?;
    let batch = if cfg.batch == 0 { scenes.len() } else { cfg.batch.min(scenes.len()) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut cursor = scenes.len();
    let mut trace = Vec::with_capacity(cfg.iters);

    for iter in 1..=cfg.iters {
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == scenes.len() {
                if batch < scenes.len() {
                    order.shuffle(&mut rng);
                }
                cursor = 0;
            }
            picked.push(&scenes[order[cursor]]);
            cursor += 1;
        }
        let (mut tape, leaves, [total, ly, lp]) = batch_losses(&params, &picked, cfg.alpha).map_err(|e| {
            log::error!("iteration {iter}: forward failed: {e}");
            match e {
                PretrainError::Autodiff(_) => PretrainError::Diverged { iter, loss: f64::NAN },
                other => other,
            }
        })?;
        let record = LossRecord { iter, total: tape.scalar(total), yamaguchi: tape.scalar(ly), power: tape.scalar(lp) };
        if !record.total.is_finite() || record.total > DIVERGENCE_LIMIT {
            log::error!(
                "diverged at iteration {iter}: total {} yamaguchi {} power {}",
                record.total,
                record.yamaguchi,
                record.power
            );
            return Err(PretrainError::Diverged { iter, loss: record.total });
        }
        trace.push(record);
        tape.backward(total)?;
        for (p, v) in params.tensors_mut().into_iter().zip(&leaves) {
            p.scaled_add(-cfg.lr, &tape.grad_or_zero(*v));
        }
        if iter % 100 == 0 {
            log::info!("iter {iter}: total {:.6}", record.total);
        }
    }
    let mut tape = Tape::new();
    let fwd = params.forward(&mut tape, &scenes[0].tokens)?;
    for (layer, mask) in fwd.masks.iter().enumerate() {
        let blocked = mask.blocked_rows();
        if !blocked.is_empty() {
            log::warn!("trained model: decoder layer {layer} has fully blocked query rows {blocked:?}");
        }
    }
    Ok(TrainOutcome { params, trace })
}

/// Yamaguchi probabilities (`4 x T`) and reconstructed power (`1 x T`).
pub fn predict(params: &ModelParams, scene: &TrainingScene) -> Result<(Matrix, Matrix), PretrainError> {
    let mut tape = Tape::new();
    let fwd = params.forward(&mut tape, &scene.tokens)?;
    let probs = tape.value(fwd.heads.yamaguchi).clone();
    let power = tape.value(fwd.heads.decomposition).sum_axis(Axis(0)).insert_axis(Axis(0));
    Ok((probs, power))
}

/// Metrics over all tokens of `scenes`, each scene predicted on its own.
pub fn evaluate(params: &ModelParams, scenes: &[TrainingScene]) -> Result<EvalMetrics, PretrainError> {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for s in scenes {
        probs.push(predict(params, s)?.0);
        labels.push(s.labels.clone());
    }
    let join = |ms: &[Matrix]| {
        ndarray::concatenate(Axis(1), &ms.iter().map(|m| m.view()).collect::<Vec<_>>())
            .map_err(|e| PretrainError::Shape(e.to_string()))
    };
    eval_metrics(&join(&probs)?, &join(&labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::scene::{synthesize_scene, SceneSpec};

    fn small() -> (EncoderConfig, DecoderConfig) {
        (EncoderConfig { d: 8, patch: 2, layers: 2, seed: 11 }, DecoderConfig { layers: 2 })
    }

    #[test]
    fn end_to_end_gradient_per_parameter_group() {
        let raster = synthesize_scene(&SceneSpec::demo(8, 8), 5).unwrap();
        let scene = TrainingScene::from_raster(&raster, 3, 2).unwrap();
        let (enc, dec) = small();
        let params = ModelParams::init(enc, dec).unwrap();
        let inputs: Vec<Matrix> = params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
        let rep = grad_check(
            |tape, v| {
                let fwd = params.forward_with(tape, v.to_vec(), &scene.tokens).expect("forward");
                let ly = loss_yamaguchi(tape, fwd.heads.yamaguchi_logits, &scene.labels).expect("ly");
                let (_, lp) = loss_power(tape, fwd.heads.decomposition, &scene.span).expect("lp");
                Ok(total_loss(tape, ly, lp, 0.1).expect("total"))
            },
            &inputs,
            1e-5,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-4, "{}", rep.max_rel_error);
        for (g, (name, _)) in params.tensors().iter().enumerate() {
            assert!(rep.analytic[g].iter().any(|v| *v != 0.0), "{name} receives no gradient");
        }
    }

    #[test]
    fn training_is_deterministic_and_rejects_bad_config() {
        let raster = synthesize_scene(&SceneSpec::demo(8, 8), 5).unwrap();
        let scene = TrainingScene::from_raster(&raster, 3, 2).unwrap();
        let (enc, dec) = small();
        let cfg = TrainConfig { iters: 20, ..Default::default() };
        let a = train(std::slice::from_ref(&scene), enc, dec, &cfg).unwrap();
        let b = train(std::slice::from_ref(&scene), enc, dec, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        let bad = TrainConfig { alpha: -1.0, ..cfg };
        assert!(matches!(train(std::slice::from_ref(&scene), enc, dec, &bad), Err(PretrainError::Config(_))));
        let huge = TrainConfig { lr: 1e9, ..cfg };
        assert!(matches!(train(&[scene], enc, dec, &huge), Err(PretrainError::Diverged { .. })));
    }

    fn uniform_scene(height: usize, width: usize, patch: usize) -> (PolsarRaster, TrainingScene) {
        use crate::polsar::ScatteringMatrix;
        use num_complex::Complex64;
        let pixel = ScatteringMatrix::from_channels([
            Complex64::new(0.9, 0.2),
            Complex64::new(0.1, -0.05),
            Complex64::new(0.1, -0.05),
            Complex64::new(0.6, -0.3),
        ]);
        let raster = PolsarRaster::new(height, width, vec![pixel; height * width], Default::default()).unwrap();
        let scene = TrainingScene::from_raster(&raster, 3, patch).unwrap();
        (raster, scene)
    }

    #[test]
    fn all_ones_labels_without_power_term_approach_the_clamp_floor() {
        let raster = synthesize_scene(&SceneSpec::demo(8, 8), 3).unwrap();
        let mut scene = TrainingScene::from_raster(&raster, 3, 2).unwrap();
        scene.labels.fill(1.0);
        let (enc, dec) = small();
        let cfg = TrainConfig { alpha: 0.0, lr: 0.5, iters: 300, ..Default::default() };
        let out = train(std::slice::from_ref(&scene), enc, dec, &cfg).unwrap();
        let first = out.trace[0].yamaguchi;
        let last = out.trace.last().unwrap().yamaguchi;
        assert!(last < 0.05 * first, "{first} -> {last}");
        assert!(last >= -(1.0 - crate::autodiff::BCE_EPS).ln() - 1e-15);
        let (probs, _) = predict(&out.params, &scene).unwrap();
        assert!(probs.iter().all(|p| *p > 0.9));
    }

    #[test]
    fn converged_power_map_matches_span_on_a_noise_free_grid() {
        let (_, scene) = uniform_scene(16, 16, 4);
        let enc = EncoderConfig { d: 16, patch: 4, layers: 2, seed: 3 };
        let cfg = TrainConfig { alpha: 10.0, lr: 1e-4, iters: 500, ..Default::default() };
        let out = train(std::slice::from_ref(&scene), enc, DecoderConfig { layers: 2 }, &cfg).unwrap();
        let (_, power) = predict(&out.params, &scene).unwrap();
        let mean = scene.span.mean().unwrap();
        let mse = (&power - &scene.span).mapv(|e| e * e).mean().unwrap();
        assert!(mse < 1e-3 * mean * mean, "mse {mse} mean {mean}");
    }
}
