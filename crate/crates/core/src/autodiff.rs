//! A small tape-based reverse-mode differentiation engine over dense 2-D
//! matrices, covering exactly the operators the pretraining harness uses.
//!
//! Every value is an `Array2<f64>`; scalars are `1x1`. Operations append a
//! node to the [`Tape`] and return a [`Var`] handle. [`Tape::backward`]
//! walks the nodes in reverse insertion order, which is a valid reverse
//! topological order because a node can only reference earlier nodes.
//!
//! ```
//! use ndarray::array;
//! use polsar_pretrain::autodiff::Tape;
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
//! let y = tape.mul(x, x).unwrap();
//! let loss = tape.mean(y).unwrap();
//! tape.backward(loss).unwrap();
//! // d/dx mean(x^2) = 2x / n
//! assert_eq!(tape.grad(x).unwrap()[[1, 1]], 2.0);
//! ```

use ndarray::{s, Array2, Axis};
use thiserror::Error;

pub type Matrix = Array2<f64>;

/// Probability clamp used by the fused binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("backward already ran on this tape; call reset_grads first")]
    BackwardTwice,
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("{op}: row range {start}..{end} out of bounds for {rows} rows")]
    RowRange { op: &'static str, start: usize, end: usize, rows: usize },
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    Sigmoid(Var),
    Softplus(Var),
    Tanh(Var),
    Mean(Var),
    MaskedAdd(Var),
    ConcatRows(Var, Var),
    SliceRows(Var, usize),
    BceWithLogits { logits: Var, targets: Matrix },
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Option<Vec<Option<Matrix>>>,
}

fn shape(m: &Matrix) -> (usize, usize) {
    m.dim()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.iter().sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Result<Var, AutodiffError> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1x1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        shape(&self.nodes[v.0].value)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Constant });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch { op, left: sa, right: sb });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b), "sub")
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c), "scale")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(AutodiffError::ShapeMismatch { op: "matmul", left: sa, right: sb });
        }
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b), "matmul")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a), "transpose")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a), "softmax_rows")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a), "sigmoid")
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a).mapv(softplus);
        self.push(v, Op::Softplus(a), "softplus")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a), "tanh")
    }

    /// Mean of all entries, as a `1x1`.
    pub fn mean(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let m = self.value(a).mean().unwrap_or(0.0);
        self.push(Array2::from_elem((1, 1), m), Op::Mean(a), "mean")
    }

    /// `a + mask` with a constant additive mask; gradient flows to `a` only.
    pub fn masked_add(&mut self, a: Var, mask: &Matrix) -> Result<Var, AutodiffError> {
        let sa = self.shape(a);
        if sa != shape(mask) {
            return Err(AutodiffError::ShapeMismatch { op: "masked_add", left: sa, right: shape(mask) });
        }
        let v = self.value(a) + mask;
        self.push(v, Op::MaskedAdd(a), "masked_add")
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(AutodiffError::ShapeMismatch { op: "concat_rows", left: sa, right: sb });
        }
        let v = ndarray::concatenate(Axis(0), &[self.value(a).view(), self.value(b).view()])
            .expect("column counts checked");
        self.push(v, Op::ConcatRows(a, b), "concat_rows")
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let rows = self.shape(a).0;
        if start >= end || end > rows {
            return Err(AutodiffError::RowRange { op: "slice_rows", start, end, rows });
        }
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start), "slice_rows")
    }

    /// Mean binary cross-entropy `-mean(y ln R + (1-y) ln(1-R))` with
    /// `R = clamp(sigmoid(logits), eps, 1-eps)`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Matrix) -> Result<Var, AutodiffError> {
        let sl = self.shape(logits);
        if sl != shape(targets) {
            return Err(AutodiffError::ShapeMismatch { op: "bce_with_logits", left: sl, right: shape(targets) });
        }
        let z = self.value(logits);
        let n = z.len() as f64;
        let total: f64 = z
            .iter()
            .zip(targets.iter())
            .map(|(&z, &y)| {
                let r = sigmoid(z).clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(y * r.ln() + (1.0 - y) * (1.0 - r).ln())
            })
            .sum();
        self.push(
            Array2::from_elem((1, 1), total / n),
            Op::BceWithLogits { logits, targets: targets.clone() },
            "bce_with_logits",
        )
    }

    /// Back-propagates from a scalar `loss`. Gradients are kept on the tape
    /// until [`Tape::reset_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        if self.grads.is_some() {
            return Err(AutodiffError::BackwardTwice);
        }
        let sl = self.shape(loss);
        if sl != (1, 1) {
            return Err(AutodiffError::NotScalar(sl));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let mut send = |v: Var, d: Matrix| match &mut grads[v.0] {
                Some(acc) => *acc += &d,
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.clone());
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone());
                    send(*b, -&g);
                }
                Op::Mul(a, b) => {
                    send(*a, &g * &self.nodes[b.0].value);
                    send(*b, &g * &self.nodes[a.0].value);
                }
                Op::Scale(a, c) => send(*a, &g * *c),
                Op::MatMul(a, b) => {
                    send(*a, g.dot(&self.nodes[b.0].value.t()));
                    send(*b, self.nodes[a.0].value.t().dot(&g));
                }
                Op::Transpose(a) => send(*a, g.t().to_owned()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    for (mut row, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let s: f64 = row.sum();
                        row.zip_mut_with(&yrow, |dv, &yv| *dv -= yv * s);
                    }
                    send(*a, d);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, &g * &y.mapv(|v| v * (1.0 - v)));
                }
                Op::Softplus(a) => {
                    let x = &self.nodes[a.0].value;
                    send(*a, &g * &x.mapv(sigmoid));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    send(*a, &g * &y.mapv(|v| 1.0 - v * v));
                }
                Op::Mean(a) => {
                    let x = &self.nodes[a.0].value;
                    let n = x.len() as f64;
                    send(*a, Array2::from_elem(x.dim(), g[[0, 0]] / n));
                }
                Op::MaskedAdd(a) => send(*a, g.clone()),
                Op::ConcatRows(a, b) => {
                    let ra = self.nodes[a.0].value.nrows();
                    send(*a, g.slice(s![..ra, ..]).to_owned());
                    send(*b, g.slice(s![ra.., ..]).to_owned());
                }
                Op::SliceRows(a, start) => {
                    let x = &self.nodes[a.0].value;
                    let mut d = Array2::zeros(x.dim());
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    send(*a, d);
                }
                Op::BceWithLogits { logits, targets } => {
                    let z = &self.nodes[logits.0].value;
                    let n = z.len() as f64;
                    let scale = g[[0, 0]] / n;
                    let mut d = Array2::zeros(z.dim());
                    ndarray::Zip::from(&mut d).and(z).and(targets).for_each(|d, &z, &y| {
                        let r = sigmoid(z);
                        // The clamp is flat outside [eps, 1 - eps].
                        *d = if (BCE_EPS..=1.0 - BCE_EPS).contains(&r) { (r - y) * scale } else { 0.0 };
                    });
                    send(*logits, d);
                }
            }
            grads[id] = Some(g);
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Gradient of the last backward pass with respect to `v`, if it was
    /// reached.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.as_ref()?.get(v.0)?.as_ref()
    }

    /// Gradient for `v`, or zeros of its shape if the loss did not depend on it.
    pub fn grad_or_zero(&self, v: Var) -> Matrix {
        self.grad(v).cloned().unwrap_or_else(|| Array2::zeros(self.shape(v)))
    }

    pub fn reset_grads(&mut self) {
        self.grads = None;
    }
}

/// Outcome of comparing reverse-mode gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub analytic: Vec<Matrix>,
    pub numeric: Vec<Matrix>,
}

/// Floor on the relative-error denominator so exact zeros compare cleanly.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Checks `backward` against central differences with step `h` for every
/// entry of every input. `f` builds a scalar on a fresh tape from leaves
/// holding `inputs`.
pub fn grad_check<F>(f: F, inputs: &[Matrix], h: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |vals: &[Matrix]| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = vals.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = f(&mut tape, &leaves)?;
        let s = tape.shape(out);
        if s != (1, 1) {
            return Err(AutodiffError::NotScalar(s));
        }
        Ok(tape.scalar(out))
    };

    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|v| tape.leaf(v.clone())).collect();
    let out = f(&mut tape, &leaves)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = leaves.iter().map(|v| tape.grad_or_zero(*v)).collect();

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut max_rel: f64 = 0.0;
    let mut vals: Vec<Matrix> = inputs.to_vec();
    for i in 0..inputs.len() {
        let mut num = Array2::zeros(inputs[i].dim());
        for idx in ndarray::indices(inputs[i].dim()) {
            let orig = vals[i][idx];
            let (xp, xm) = (orig + h, orig - h);
            vals[i][idx] = xp;
            let fp = eval(&vals)?;
            vals[i][idx] = xm;
            let fm = eval(&vals)?;
            vals[i][idx] = orig;
            // Divide by the step actually taken after rounding.
            let d = (fp - fm) / (xp - xm);
            num[idx] = d;
            max_rel = max_rel.max(relative_error(analytic[i][idx], d));
        }
        numeric.push(num);
    }
    Ok(GradCheckReport { max_rel_error: max_rel, analytic, numeric })
}
