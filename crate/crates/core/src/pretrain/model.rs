use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PretrainError;
use crate::autodiff::{Matrix, Tape, Var};
use crate::bases::BasisKind;
use crate::polsar::PolsarRaster;
use crate::queries::{shipped_queries, QUERY_DIM};

/// Queries in the Yamaguchi bank (surface, double-bounce, volume, helix).
pub const YAMAGUCHI_QUERIES: usize = 4;
/// Queries in the decomposition bank, one per scattering basis.
pub const DECOMPOSITION_QUERIES: usize = 10;
/// Additive value for a blocked mask entry.
pub const BLOCKED: f64 = -1e9;
/// Coefficient at or above which a mask entry stays open.
pub const MASK_THRESHOLD: f64 = 0.5;

const INPUT_CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d: usize,
    pub patch: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { d: 64, patch: 4, layers: 2, seed: 7 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), PretrainError> {
        if self.d < 8 {
            return Err(PretrainError::Config(format!("d must be >= 8, got {}", self.d)));
        }
        if self.patch == 0 || self.layers == 0 {
            return Err(PretrainError::Config("patch and layers must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub layers: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { layers: 3 }
    }
}

/// Projections of one decoder layer: cross attention (`wq`, `wk`, `wv`) then
/// self attention over the queries (`sq`, `sk`, `sv`).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub sq: Matrix,
    pub sk: Matrix,
    pub sv: Matrix,
}

impl DecoderWeights {
    const NAMES: [&'static str; 6] = ["wq", "wk", "wv", "sq", "sk", "sv"];

    fn tensors(&self) -> [&Matrix; 6] {
        [&self.wq, &self.wk, &self.wv, &self.sq, &self.sk, &self.sv]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [&mut self.wq, &mut self.wk, &mut self.wv, &mut self.sq, &mut self.sk, &mut self.sv]
    }
}

/// Every learnable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    /// `8 p^2 x d`, then `d x d` for each further layer.
    pub encoder_weights: Vec<Matrix>,
    /// Both banks stacked: Yamaguchi rows first, then decomposition rows.
    pub queries: Matrix,
    pub layers: Vec<DecoderWeights>,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}

impl ModelParams {
    /// Seeded initialization. The query banks start from the shipped
    /// scattering queries through a fixed `256 -> d` projection.
    pub fn init(encoder: EncoderConfig, decoder: DecoderConfig) -> Result<Self, PretrainError> {
        encoder.validate()?;
        let d = encoder.d;
        let mut rng = ChaCha8Rng::seed_from_u64(encoder.seed);

        let mut encoder_weights = Vec::with_capacity(encoder.layers);
        let fan_in = INPUT_CHANNELS * encoder.patch * encoder.patch;
        encoder_weights.push(gaussian(&mut rng, fan_in, d, (1.0 / fan_in as f64).sqrt()));
        for _ in 1..encoder.layers {
            encoder_weights.push(gaussian(&mut rng, d, d, (1.0 / d as f64).sqrt()));
        }

        rng.set_stream(1);
        let proj = gaussian(&mut rng, QUERY_DIM, d, (1.0 / d as f64).sqrt());
        let shipped = shipped_queries();
        let kinds = BasisKind::YAMAGUCHI.iter().chain(BasisKind::ALL.iter());
        let mut queries = Array2::zeros((YAMAGUCHI_QUERIES + DECOMPOSITION_QUERIES, d));
        for (row, kind) in kinds.enumerate() {
            let q = &shipped[kind.index()];
            let v = Array2::from_shape_vec((1, QUERY_DIM), q.vec256.clone()).expect("query length");
            queries.row_mut(row).assign(&v.dot(&proj).row(0));
        }

        rng.set_stream(2);
        let s = 0.25 / (d as f64).sqrt();
        let layers = (0..decoder.layers)
            .map(|_| DecoderWeights {
                wq: gaussian(&mut rng, d, d, s),
                wk: gaussian(&mut rng, d, d, s),
                wv: gaussian(&mut rng, d, d, s),
                sq: gaussian(&mut rng, d, d, s),
                sk: gaussian(&mut rng, d, d, s),
                sv: gaussian(&mut rng, d, d, s),
            })
            .collect();

        Ok(Self { encoder, decoder, encoder_weights, queries, layers })
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out: Vec<(String, &Matrix)> =
            self.encoder_weights.iter().enumerate().map(|(i, m)| (format!("encoder.{i}"), m)).collect();
        out.push(("queries".into(), &self.queries));
        for (l, w) in self.layers.iter().enumerate() {
            for (name, m) in DecoderWeights::NAMES.iter().zip(w.tensors()) {
                out.push((format!("decoder.{l}.{name}"), m));
            }
        }
        out
    }

    /// Mutable tensors in the order of [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.encoder_weights.iter_mut().collect();
        out.push(&mut self.queries);
        for w in self.layers.iter_mut() {
            out.extend(w.tensors_mut());
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }
}

/// The 8 real channels of a raster as `(8, H, W)`.
pub fn raster_channels(raster: &PolsarRaster) -> Array3<f64> {
    let (h, w) = (raster.height(), raster.width());
    let flat: Vec<f64> = raster.to_planes().into_iter().flatten().collect();
    Array3::from_shape_vec((INPUT_CHANNELS, h, w), flat).expect("8 planes of h*w")
}

/// Non-overlapping `p x p` patches as rows, tokens in row-major order and
/// each row laid out channel-major then row then column.
pub fn patchify(input: &Array3<f64>, patch: usize) -> Result<Matrix, PretrainError> {
    let (c, h, w) = input.dim();
    if c != INPUT_CHANNELS {
        return Err(PretrainError::Shape(format!("expected 8 input channels, got {c}")));
    }
    if patch == 0 || h % patch != 0 || w % patch != 0 || h == 0 || w == 0 {
        return Err(PretrainError::Shape(format!("patch {patch} does not divide {h}x{w}")));
    }
    let (gh, gw) = (h / patch, w / patch);
    let mut out = Array2::zeros((gh * gw, c * patch * patch));
    for gr in 0..gh {
        for gc in 0..gw {
            let mut row = out.row_mut(gr * gw + gc);
            for ch in 0..c {
                for dy in 0..patch {
                    for dx in 0..patch {
                        row[(ch * patch + dy) * patch + dx] = input[[ch, gr * patch + dy, gc * patch + dx]];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Patch tokens (`T x 8p^2`) to features (`T x d`): a bias-free linear
/// embedding followed by `tanh`, repeated once per encoder layer.
pub fn encode(tape: &mut Tape, tokens: Var, weights: &[Var]) -> Result<Var, PretrainError> {
    let mut x = tokens;
    for w in weights {
        let z = tape.matmul(x, *w)?;
        x = tape.tanh(z)?;
    }
    Ok(x)
}

/// Additive attention mask, one row per query and one column per token.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask(pub Matrix);

impl AttentionMask {
    pub fn open(queries: usize, tokens: usize) -> Self {
        Self(Array2::zeros((queries, tokens)))
    }

    pub fn is_open(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Rows whose every entry is blocked.
    pub fn blocked_rows(&self) -> Vec<usize> {
        self.0.rows().into_iter().enumerate().filter(|(_, r)| r.iter().all(|v| *v == BLOCKED)).map(|(i, _)| i).collect()
    }
}

/// 0 where `coefficient >= 0.5`, blocked elsewhere.
pub fn update_mask(coefficients: &Matrix) -> AttentionMask {
    AttentionMask(coefficients.mapv(|c| if c >= MASK_THRESHOLD { 0.0 } else { BLOCKED }))
}

/// `softmax(M + (W Wq)(F Wk)^T)(F Wv) + W`.
pub fn masked_attention_layer(
    tape: &mut Tape,
    queries: Var,
    features: Var,
    (wq, wk, wv): (Var, Var, Var),
    mask: &AttentionMask,
) -> Result<Var, PretrainError> {
    let (nq, nt) = (tape.shape(queries).0, tape.shape(features).0);
    if mask.0.dim() != (nq, nt) {
        return Err(PretrainError::Shape(format!("mask {:?} does not match {nq} queries x {nt} tokens", mask.0.dim())));
    }
    let blocked = mask.blocked_rows();
    let q = tape.matmul(queries, wq)?;
    let k = tape.matmul(features, wk)?;
    let v = tape.matmul(features, wv)?;
    let kt = tape.transpose(k)?;
    let mut scores = tape.matmul(q, kt)?;
    let mut additive = mask.0.clone();
    if !blocked.is_empty() {
        log::debug!("attention rows {blocked:?} are fully blocked; attending uniformly");
        // A row of equal entries: zero its scores and its mask.
        let mut keep = Array2::ones((nq, nt));
        for &r in &blocked {
            keep.row_mut(r).fill(0.0);
            additive.row_mut(r).fill(0.0);
        }
        let keep = tape.constant(keep);
        scores = tape.mul(scores, keep)?;
    }
    let masked = tape.masked_add(scores, &additive)?;
    let attn = tape.softmax_rows(masked)?;
    let mixed = tape.matmul(attn, v)?;
    Ok(tape.add(mixed, queries)?)
}

/// `softmax((W Sq)(W Sk)^T)(W Sv) + W` over the query set.
pub fn self_attention_layer(
    tape: &mut Tape,
    queries: Var,
    (sq, sk, sv): (Var, Var, Var),
) -> Result<Var, PretrainError> {
    let q = tape.matmul(queries, sq)?;
    let k = tape.matmul(queries, sk)?;
    let v = tape.matmul(queries, sv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let attn = tape.softmax_rows(scores)?;
    let mixed = tape.matmul(attn, v)?;
    Ok(tape.add(mixed, queries)?)
}

/// Head outputs over `T` tokens.
#[derive(Debug, Clone, Copy)]
pub struct HeadOutputs {
    /// `4 x T` query-feature dot products of the Yamaguchi bank.
    pub yamaguchi_logits: Var,
    /// `10 x T` dot products of the decomposition bank.
    pub decomposition_logits: Var,
    /// `sigmoid` of the Yamaguchi logits.
    pub yamaguchi: Var,
    /// `softplus` of the decomposition logits.
    pub decomposition: Var,
}

pub fn predict_heads(tape: &mut Tape, queries: Var, features: Var) -> Result<HeadOutputs, PretrainError> {
    let nq = tape.shape(queries).0;
    if nq != YAMAGUCHI_QUERIES + DECOMPOSITION_QUERIES {
        return Err(PretrainError::Shape(format!("expected 14 queries, got {nq}")));
    }
    let ft = tape.transpose(features)?;
    let logits = tape.matmul(queries, ft)?;
    let yamaguchi_logits = tape.slice_rows(logits, 0, YAMAGUCHI_QUERIES)?;
    let decomposition_logits = tape.slice_rows(logits, YAMAGUCHI_QUERIES, nq)?;
    let yamaguchi = tape.sigmoid(yamaguchi_logits)?;
    let decomposition = tape.softplus(decomposition_logits)?;
    Ok(HeadOutputs { yamaguchi_logits, decomposition_logits, yamaguchi, decomposition })
}

/// Handles into one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub params: Vec<Var>,
    pub features: Var,
    pub heads: HeadOutputs,
    /// Masks used by each decoder layer.
    pub masks: Vec<AttentionMask>,
}

impl ModelParams {
    /// Places every parameter on `tape` as a leaf and runs encoder, decoder
    /// and heads over `tokens`.
    pub fn forward(&self, tape: &mut Tape, tokens: &Matrix) -> Result<Forward, PretrainError> {
        let params: Vec<Var> = self.tensors().into_iter().map(|(_, m)| tape.leaf(m.clone())).collect();
        self.forward_with(tape, params, tokens)
    }

    /// Forward pass over caller-supplied parameter handles, ordered as
    /// [`ModelParams::tensors`]. Only the configuration of `self` is used.
    pub fn forward_with(&self, tape: &mut Tape, params: Vec<Var>, tokens: &Matrix) -> Result<Forward, PretrainError> {
        if params.len() != self.tensors().len() {
            return Err(PretrainError::Shape(format!(
                "expected {} parameter handles, got {}",
                self.tensors().len(),
                params.len()
            )));
        }
        let expected = INPUT_CHANNELS * self.encoder.patch * self.encoder.patch;
        if tokens.ncols() != expected {
            return Err(PretrainError::Shape(format!("token width {} != {expected}", tokens.ncols())));
        }
        let ne = self.encoder_weights.len();
        let x = tape.constant(tokens.clone());
        let features = encode(tape, x, &params[..ne])?;
        let mut w = params[ne];
        let nt = tokens.nrows();
        let nq = self.queries.nrows();

        let mut masks = Vec::with_capacity(self.layers.len());
        let mut mask = AttentionMask::open(nq, nt);
        for l in 0..self.layers.len() {
            let p = &params[ne + 1 + 6 * l..ne + 7 + 6 * l];
            w = masked_attention_layer(tape, w, features, (p[0], p[1], p[2]), &mask)?;
            w = self_attention_layer(tape, w, (p[3], p[4], p[5]))?;
            masks.push(mask);
            // Yamaguchi coefficient maps of this layer gate the next one;
            // the decomposition bank has no segmentation map and stays open.
            let logits = tape.value(w).slice(ndarray::s![..YAMAGUCHI_QUERIES, ..]).dot(&tape.value(features).t());
            mask = AttentionMask::open(nq, nt);
            let gate = update_mask(&logits.mapv(crate::autodiff::sigmoid));
            mask.0.slice_mut(ndarray::s![..YAMAGUCHI_QUERIES, ..]).assign(&gate.0);
        }
        let heads = predict_heads(tape, w, features)?;
        Ok(Forward { params, features, heads, masks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, softmax_rows};
    use ndarray::array;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        gaussian(rng, r, c, 1.0)
    }

    /// Independent loop over `softmax(M + Q K^T) V + W`. A row whose mask
    /// entries are all blocked is a softmax of equal entries: uniform.
    fn attention_loop(w: &Matrix, f: &Matrix, wq: &Matrix, wk: &Matrix, wv: &Matrix, m: &Matrix) -> Matrix {
        let q = w.dot(wq);
        let k = f.dot(wk);
        let v = f.dot(wv);
        let (nq, nt, d) = (q.nrows(), k.nrows(), v.ncols());
        let mut out = w.clone();
        for i in 0..nq {
            let mut logits = vec![0.0; nt];
            let all_blocked = (0..nt).all(|j| m[[i, j]] == BLOCKED);
            for j in (0..nt).filter(|_| !all_blocked) {
                let mut s = 0.0;
                for c in 0..q.ncols() {
                    s += q[[i, c]] * k[[j, c]];
                }
                logits[j] = m[[i, j]] + s;
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..d {
                let mut acc = 0.0;
                for j in 0..nt {
                    acc += e[j] / z * v[[j, c]];
                }
                out[[i, c]] += acc;
            }
        }
        out
    }

    fn run_layer(w: &Matrix, f: &Matrix, ws: [&Matrix; 3], mask: &AttentionMask) -> Matrix {
        let mut t = Tape::new();
        let wv_ = t.leaf(w.clone());
        let fv = t.constant(f.clone());
        let p = (t.leaf(ws[0].clone()), t.leaf(ws[1].clone()), t.leaf(ws[2].clone()));
        let out = masked_attention_layer(&mut t, wv_, fv, p, mask).unwrap();
        t.value(out).clone()
    }

    #[test]
    fn single_key_and_equal_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = randn(&mut rng, 3, 4);
        let f = randn(&mut rng, 1, 4);
        let (wq, wk, wv) = (randn(&mut rng, 4, 4), randn(&mut rng, 4, 4), randn(&mut rng, 4, 4));
        let out = run_layer(&w, &f, [&wq, &wk, &wv], &AttentionMask::open(3, 1));
        let v = f.dot(&wv);
        for i in 0..3 {
            for c in 0..4 {
                assert!((out[[i, c]] - (v[[0, c]] + w[[i, c]])).abs() < 1e-12);
            }
        }
        let f2 = ndarray::concatenate![ndarray::Axis(0), f, f];
        let out2 = run_layer(&w, &f2, [&wq, &wk, &wv], &AttentionMask::open(3, 2));
        assert!((&out2 - &out).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn layer_matches_loop_for_open_mixed_and_blocked_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = randn(&mut rng, 5, 6);
        let f = randn(&mut rng, 9, 6);
        let (wq, wk, wv) = (randn(&mut rng, 6, 6), randn(&mut rng, 6, 6), randn(&mut rng, 6, 6));
        let coeff = randn(&mut rng, 5, 9).mapv(crate::autodiff::sigmoid);
        let mut mixed = update_mask(&coeff);
        mixed.0.row_mut(2).fill(BLOCKED);
        for mask in [AttentionMask::open(5, 9), mixed] {
            let got = run_layer(&w, &f, [&wq, &wk, &wv], &mask);
            let want = attention_loop(&w, &f, &wq, &wk, &wv, &mask.0);
            let err = (&got - &want).iter().fold(0.0f64, |m, d| m.max(d.abs()));
            assert!(err <= 1e-12, "{err}");
        }
    }

    #[test]
    fn fully_blocked_row_attends_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = randn(&mut rng, 3, 4);
        let f = randn(&mut rng, 5, 4);
        let (wq, wk, wv) = (randn(&mut rng, 4, 4), randn(&mut rng, 4, 4), randn(&mut rng, 4, 4));
        let mut mask = AttentionMask::open(3, 5);
        mask.0.row_mut(1).fill(BLOCKED);
        let got = run_layer(&w, &f, [&wq, &wk, &wv], &mask);
        let mean_v = f.dot(&wv).mean_axis(ndarray::Axis(0)).unwrap();
        for c in 0..4 {
            assert!((got[[1, c]] - (mean_v[c] + w[[1, c]])).abs() < 1e-12);
        }
        let open = run_layer(&w, &f, [&wq, &wk, &wv], &AttentionMask::open(3, 5));
        assert_eq!(got.row(0), open.row(0));
    }

    #[test]
    fn decomposition_bank_is_never_masked() {
        let enc = EncoderConfig { d: 8, patch: 2, layers: 1, seed: 2 };
        let params = ModelParams::init(enc, DecoderConfig { layers: 3 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tokens = randn(&mut rng, 6, 32);
        let mut tape = Tape::new();
        let fwd = params.forward(&mut tape, &tokens).unwrap();
        assert!(fwd.masks[0].is_open());
        for m in &fwd.masks {
            assert!(m.0.slice(ndarray::s![YAMAGUCHI_QUERIES.., ..]).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn open_mask_equals_unmasked_attention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = randn(&mut rng, 4, 5);
        let f = randn(&mut rng, 6, 5);
        let (wq, wk, wv) = (randn(&mut rng, 5, 5), randn(&mut rng, 5, 5), randn(&mut rng, 5, 5));
        let got = run_layer(&w, &f, [&wq, &wk, &wv], &AttentionMask::open(4, 6));
        let plain = softmax_rows(&w.dot(&wq).dot(&f.dot(&wk).t())).dot(&f.dot(&wv)) + &w;
        assert_eq!(got, plain);
    }

    #[test]
    fn mask_rule() {
        assert!(update_mask(&Array2::ones((3, 4))).is_open());
        let blocked = update_mask(&Array2::zeros((2, 3)));
        assert_eq!(blocked.blocked_rows(), vec![0, 1]);
        let c = array![[0.5, 0.49], [0.9, 0.1]];
        let m = update_mask(&c);
        for ((i, j), v) in m.0.indexed_iter() {
            assert_eq!(*v, if c[[i, j]] >= 0.5 { 0.0 } else { BLOCKED });
        }
        let mut t = Tape::new();
        let w = t.leaf(Array2::zeros((2, 3)));
        let f = t.constant(Array2::zeros((4, 3)));
        let p = (t.leaf(Array2::eye(3)), t.leaf(Array2::eye(3)), t.leaf(Array2::eye(3)));
        assert!(matches!(
            masked_attention_layer(&mut t, w, f, p, &AttentionMask::open(2, 5)),
            Err(PretrainError::Shape(_))
        ));
    }

    #[test]
    fn heads_on_zero_logits_and_against_loop() {
        let mut t = Tape::new();
        let q = t.leaf(Array2::zeros((14, 8)));
        let f = t.leaf(Array2::ones((5, 8)));
        let h = predict_heads(&mut t, q, f).unwrap();
        assert!(t.value(h.yamaguchi).iter().all(|v| *v == 0.5));
        assert!(t.value(h.decomposition).iter().all(|v| *v == std::f64::consts::LN_2));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let qm = randn(&mut rng, 14, 8);
        let fm = randn(&mut rng, 5, 8);
        let mut t = Tape::new();
        let q = t.leaf(qm.clone());
        let f = t.leaf(fm.clone());
        let h = predict_heads(&mut t, q, f).unwrap();
        for k in 0..14 {
            for j in 0..5 {
                let dot: f64 = (0..8).map(|c| qm[[k, c]] * fm[[j, c]]).sum();
                let got = if k < 4 {
                    t.value(h.yamaguchi_logits)[[k, j]]
                } else {
                    t.value(h.decomposition_logits)[[k - 4, j]]
                };
                assert!((got - dot).abs() < 1e-12);
            }
        }
        assert!(t.value(h.yamaguchi).iter().all(|v| *v > 0.0 && *v < 1.0));
        assert!(t.value(h.decomposition).iter().all(|v| *v > 0.0));
    }

    #[test]
    fn encoder_properties() {
        let cfg = EncoderConfig { d: 8, patch: 2, layers: 2, seed: 3 };
        let params = ModelParams::init(cfg, DecoderConfig::default()).unwrap();
        let mut t = Tape::new();
        let ws: Vec<Var> = params.encoder_weights.iter().map(|m| t.leaf(m.clone())).collect();
        let x = t.constant(Array2::zeros((4, 32)));
        let f = encode(&mut t, x, &ws).unwrap();
        assert!(t.value(f).iter().all(|v| *v == 0.0));

        // Identical patches give identical feature rows.
        let input = Array3::from_shape_fn((8, 4, 4), |(c, y, x)| ((c * 7 + (y % 2) * 3 + x % 2) as f64).sin());
        let tokens = patchify(&input, 2).unwrap();
        let xt = t.constant(tokens);
        let f = encode(&mut t, xt, &ws).unwrap();
        let fv = t.value(f);
        for r in 1..4 {
            assert_eq!(fv.row(r), fv.row(0));
        }

        assert!(patchify(&Array3::zeros((7, 4, 4)), 2).is_err());
        assert!(patchify(&Array3::zeros((8, 5, 4)), 2).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = randn(&mut rng, 4, 32);
        let enc = params.encoder_weights.clone();
        let rep = grad_check(
            |t, v| {
                let ws: Vec<Var> = enc.iter().map(|m| t.constant(m.clone())).collect();
                let f = encode(t, v[0], &ws).map_err(|_| crate::autodiff::AutodiffError::NonFinite("encode"))?;
                t.mean(f)
            },
            &[input],
            1e-5,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-4, "{}", rep.max_rel_error);
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(EncoderConfig::default(), DecoderConfig::default()).unwrap();
        let b = ModelParams::init(EncoderConfig::default(), DecoderConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = ModelParams::init(EncoderConfig { seed: 8, ..Default::default() }, DecoderConfig::default()).unwrap();
        assert_ne!(a.encoder_weights[0], c.encoder_weights[0]);
        assert_eq!(a.tensors().len(), 2 + 1 + 6 * 3);
        assert!(ModelParams::init(EncoderConfig { d: 4, ..Default::default() }, DecoderConfig::default()).is_err());
    }
}
