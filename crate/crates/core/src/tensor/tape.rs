//! Define-by-run reverse-mode differentiation on dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! replays the record in reverse and accumulates gradients for every node
//! that (transitively) depends on a leaf. Tapes are cheap and rebuilt each
//! training iteration.

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use super::mat::{bce_logit, sigmoid, Mat};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs_rows}x{lhs_cols} and {rhs_rows}x{rhs_cols}")]
    ShapeMismatch { op: &'static str, lhs_rows: usize, lhs_cols: usize, rhs_rows: usize, rhs_cols: usize },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("{op}: operands belong to different tapes")]
    TapeMismatch { op: &'static str },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs_rows: a.rows,
        lhs_cols: a.cols,
        rhs_rows: b.rows,
        rhs_cols: b.cols,
    }
}

#[derive(Clone)]
enum Op {
    Leaf,
    Constant,
    Matmul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    ScalarMul(usize, f64),
    /// Multiply every entry by a 1x1 tensor (the scalar participates in
    /// differentiation, unlike `ScalarMul`).
    ScaleByScalar(usize, usize),
    /// Row-broadcast addition of a 1 x d bias onto an n x d matrix.
    AddBias(usize, usize),
    ConcatCols(usize, usize),
    RowL2Normalize(usize),
    ReduceSum(usize),
    Transpose(usize),
    Relu(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Clamp(usize, f64, f64),
    /// Sum of weighted binary cross-entropy over all entries, from logits.
    BceLogits { logits: usize, targets: usize, weights: Option<usize> },
    /// Horvitz-Thompson style estimate of the full BCE sum from sampled
    /// entries of the Gram matrix z z^T, without materializing it.
    SampledGramBce {
        z: usize,
        pairs: Arc<Vec<(u32, u32)>>,
        targets: Arc<Vec<f64>>,
        weights: Arc<Vec<f64>>,
        scale: f64,
    },
    /// Mean softmax cross-entropy over a masked subset of rows.
    SoftmaxCeMasked { logits: usize, labels: Arc<Vec<usize>>, mask: Arc<Vec<usize>> },
}

struct Node {
    value: Arc<Mat>,
    grad: Option<Mat>,
    op: Op,
    requires_grad: bool,
}

struct TapeInner {
    nodes: Vec<Node>,
    check_finite: bool,
    /// Smallest |x| seen by any relu input on this tape; used by the
    /// gradient checker to flag evaluations near the kink.
    relu_min_abs: f64,
}

/// Shared handle to one recorded computation.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                check_finite: true,
                relu_min_abs: f64::INFINITY,
            })),
        }
    }

    /// Disable the per-op finiteness scan (it is on by default).
    pub fn set_check_finite(&self, on: bool) {
        self.inner.borrow_mut().check_finite = on;
    }

    pub fn min_relu_input_abs(&self) -> f64 {
        self.inner.borrow().relu_min_abs
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record an input that does not require gradients.
    pub fn constant(&self, value: Mat) -> Tensor {
        self.push_unchecked(value, Op::Constant, false)
    }

    pub fn constant_shared(&self, value: Arc<Mat>) -> Tensor {
        self.push_arc_unchecked(value, Op::Constant, false)
    }

    /// Record a differentiable input (a parameter).
    pub fn leaf(&self, value: Mat) -> Tensor {
        self.push_unchecked(value, Op::Leaf, true)
    }

    fn push_unchecked(&self, value: Mat, op: Op, requires_grad: bool) -> Tensor {
        self.push_arc_unchecked(Arc::new(value), op, requires_grad)
    }

    fn push_arc_unchecked(&self, value: Arc<Mat>, op: Op, requires_grad: bool) -> Tensor {
        let (rows, cols) = value.shape();
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { value, grad: None, op, requires_grad });
        Tensor { tape: self.clone(), id: inner.nodes.len() - 1, rows, cols }
    }

    fn push(&self, op_name: &'static str, value: Mat, op: Op, requires_grad: bool) -> Result<Tensor, TensorError> {
        if self.inner.borrow().check_finite && !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn value(&self, id: usize) -> Arc<Mat> {
        Arc::clone(&self.inner.borrow().nodes[id].value)
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.inner.borrow().nodes[id].requires_grad
    }

    /// Reverse pass from a scalar loss. Gradients of all reachable
    /// differentiable nodes become available through [`Tensor::grad`].
    pub fn backward(&self, loss: &Tensor) -> Result<(), TensorError> {
        if !Rc::ptr_eq(&self.inner, &loss.tape.inner) {
            return Err(TensorError::TapeMismatch { op: "backward" });
        }
        if loss.rows != 1 || loss.cols != 1 {
            return Err(TensorError::NonScalarLoss { rows: loss.rows, cols: loss.cols });
        }
        let mut inner = self.inner.borrow_mut();
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Mat>> = (0..n).map(|_| None).collect();
        grads[loss.id] = Some(Mat::scalar(1.0));

        for id in (0..n).rev() {
            let Some(grad) = grads[id].take() else { continue };
            if !inner.nodes[id].requires_grad {
                continue;
            }
            let op = inner.nodes[id].op.clone();
            let out_value = Arc::clone(&inner.nodes[id].value);
            {
                // Closure over the accumulation buffer; keeps borrow scopes tight.
                let nodes = &inner.nodes;
                let mut accum = |target: usize, delta: Mat| {
                    if !nodes[target].requires_grad {
                        return;
                    }
                    match &mut grads[target] {
                        Some(g) => g.add_assign(&delta),
                        slot => *slot = Some(delta),
                    }
                };
                match op {
                    Op::Leaf | Op::Constant => {}
                    Op::Matmul(a, b) => {
                        if nodes[a].requires_grad {
                            accum(a, grad.matmul(&nodes[b].value.transpose()));
                        }
                        if nodes[b].requires_grad {
                            accum(b, nodes[a].value.transpose().matmul(&grad));
                        }
                    }
                    Op::Add(a, b) => {
                        accum(a, grad.clone());
                        accum(b, grad.clone());
                    }
                    Op::Sub(a, b) => {
                        accum(a, grad.clone());
                        accum(b, grad.scale(-1.0));
                    }
                    Op::Hadamard(a, b) => {
                        if nodes[a].requires_grad {
                            accum(a, grad.hadamard(&nodes[b].value));
                        }
                        if nodes[b].requires_grad {
                            accum(b, grad.hadamard(&nodes[a].value));
                        }
                    }
                    Op::ScalarMul(a, c) => accum(a, grad.scale(c)),
                    Op::ScaleByScalar(a, s) => {
                        if nodes[a].requires_grad {
                            accum(a, grad.scale(nodes[s].value.get(0, 0)));
                        }
                        if nodes[s].requires_grad {
                            accum(s, Mat::scalar(grad.hadamard(&nodes[a].value).sum()));
                        }
                    }
                    Op::AddBias(a, b) => {
                        accum(a, grad.clone());
                        accum(b, grad.col_sums());
                    }
                    Op::ConcatCols(a, b) => {
                        let (ca, cb) = (nodes[a].value.cols(), nodes[b].value.cols());
                        let rows = grad.rows();
                        let mut ga = Mat::zeros(rows, ca);
                        let mut gb = Mat::zeros(rows, cb);
                        for i in 0..rows {
                            ga.row_mut(i).copy_from_slice(&grad.row(i)[..ca]);
                            gb.row_mut(i).copy_from_slice(&grad.row(i)[ca..]);
                        }
                        accum(a, ga);
                        accum(b, gb);
                    }
                    Op::RowL2Normalize(a) => {
                        let x = &nodes[a].value;
                        let y = &out_value;
                        let mut gx = Mat::zeros(x.rows(), x.cols());
                        for i in 0..x.rows() {
                            let norm = {
                                let mut s = 0.0;
                                for &v in x.row(i) {
                                    s += v * v;
                                }
                                s.sqrt()
                            };
                            if norm == 0.0 {
                                continue; // zero rows stay zero; subgradient 0
                            }
                            let g_row = grad.row(i);
                            let y_row = y.row(i);
                            let mut dot = 0.0;
                            for (&g, &yv) in g_row.iter().zip(y_row) {
                                dot += g * yv;
                            }
                            for ((o, &g), &yv) in gx.row_mut(i).iter_mut().zip(g_row).zip(y_row) {
                                *o = (g - yv * dot) / norm;
                            }
                        }
                        accum(a, gx);
                    }
                    Op::ReduceSum(a) => {
                        let g = grad.get(0, 0);
                        let (r, c) = nodes[a].value.shape();
                        accum(a, Mat::filled(r, c, g));
                    }
                    Op::Transpose(a) => accum(a, grad.transpose()),
                    Op::Relu(a) => {
                        accum(a, grad.zip_map(&nodes[a].value, |g, x| if x > 0.0 { g } else { 0.0 }));
                    }
                    Op::Sigmoid(a) => {
                        accum(a, grad.zip_map(&out_value, |g, y| g * y * (1.0 - y)));
                    }
                    Op::Exp(a) => accum(a, grad.hadamard(&out_value)),
                    Op::Log(a) => {
                        accum(a, grad.zip_map(&nodes[a].value, |g, x| g / x));
                    }
                    Op::Clamp(a, lo, hi) => {
                        accum(a, grad.zip_map(&nodes[a].value, |g, x| if x > lo && x < hi { g } else { 0.0 }));
                    }
                    Op::BceLogits { logits, targets, weights } => {
                        if nodes[logits].requires_grad {
                            let g = grad.get(0, 0);
                            let x = &nodes[logits].value;
                            let t = &nodes[targets].value;
                            let mut dx = x.zip_map(t, |xv, tv| g * (sigmoid(xv) - tv));
                            if let Some(w) = weights {
                                dx = dx.hadamard(&nodes[w].value);
                            }
                            accum(logits, dx);
                        }
                    }
                    Op::SampledGramBce { z, pairs, targets, weights, scale } => {
                        if nodes[z].requires_grad {
                            let g = grad.get(0, 0) * scale;
                            let zv = &nodes[z].value;
                            let k = zv.cols();
                            let mut dz = Mat::zeros(zv.rows(), k);
                            for (s, &(i, j)) in pairs.iter().enumerate() {
                                let (i, j) = (i as usize, j as usize);
                                let (ri, rj) = (zv.row(i), zv.row(j));
                                let mut logit = 0.0;
                                for (a, b) in ri.iter().zip(rj) {
                                    logit += a * b;
                                }
                                let d = g * weights[s] * (sigmoid(logit) - targets[s]);
                                for (o, &v) in dz.row_mut(i).iter_mut().zip(rj) {
                                    *o += d * v;
                                }
                                for (o, &v) in dz.row_mut(j).iter_mut().zip(ri) {
                                    *o += d * v;
                                }
                            }
                            accum(z, dz);
                        }
                    }
                    Op::SoftmaxCeMasked { logits, labels, mask } => {
                        if nodes[logits].requires_grad {
                            let g = grad.get(0, 0) / mask.len() as f64;
                            let x = &nodes[logits].value;
                            let mut dx = Mat::zeros(x.rows(), x.cols());
                            for &i in mask.iter() {
                                let row = x.row(i);
                                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                                let mut denom = 0.0;
                                for &v in row {
                                    denom += (v - m).exp();
                                }
                                let out = dx.row_mut(i);
                                for (j, &v) in row.iter().enumerate() {
                                    out[j] = g * ((v - m).exp() / denom - if j == labels[i] { 1.0 } else { 0.0 });
                                }
                            }
                            accum(logits, dx);
                        }
                    }
                }
            }
            inner.nodes[id].grad = Some(grad);
        }
        Ok(())
    }
}

/// Handle to one value recorded on a tape.
#[derive(Clone)]
pub struct Tensor {
    tape: Tape,
    id: usize,
    rows: usize,
    cols: usize,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Tensor {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Shared reference to the forward value.
    pub fn value(&self) -> Arc<Mat> {
        self.tape.value(self.id)
    }

    /// Gradient accumulated by the last [`Tape::backward`] call, if any.
    pub fn grad(&self) -> Option<Mat> {
        self.tape.inner.borrow().nodes[self.id].grad.clone()
    }

    /// Scalar value of a 1x1 tensor.
    pub fn item(&self) -> Result<f64, TensorError> {
        if self.rows != 1 || self.cols != 1 {
            return Err(TensorError::Invalid {
                op: "item",
                msg: format!("expected 1x1, got {}x{}", self.rows, self.cols),
            });
        }
        Ok(self.value().get(0, 0))
    }

    fn same_tape(&self, other: &Tensor, op: &'static str) -> Result<(), TensorError> {
        if Rc::ptr_eq(&self.tape.inner, &other.tape.inner) {
            Ok(())
        } else {
            Err(TensorError::TapeMismatch { op })
        }
    }

    fn binary_requires(&self, other: &Tensor) -> bool {
        self.tape.requires_grad(self.id) || other.tape.requires_grad(other.id)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(other, "matmul")?;
        if self.cols != other.rows {
            return Err(shape_err("matmul", self, other));
        }
        let value = self.value().matmul(&other.value());
        self.tape.push("matmul", value, Op::Matmul(self.id, other.id), self.binary_requires(other))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(other, "add")?;
        if self.shape() != other.shape() {
            return Err(shape_err("add", self, other));
        }
        let value = self.value().add(&other.value());
        self.tape.push("add", value, Op::Add(self.id, other.id), self.binary_requires(other))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(other, "sub")?;
        if self.shape() != other.shape() {
            return Err(shape_err("sub", self, other));
        }
        let value = self.value().sub(&other.value());
        self.tape.push("sub", value, Op::Sub(self.id, other.id), self.binary_requires(other))
    }

    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(other, "hadamard")?;
        if self.shape() != other.shape() {
            return Err(shape_err("hadamard", self, other));
        }
        let value = self.value().hadamard(&other.value());
        self.tape.push("hadamard", value, Op::Hadamard(self.id, other.id), self.binary_requires(other))
    }

    pub fn scalar_mul(&self, c: f64) -> Result<Tensor, TensorError> {
        let value = self.value().scale(c);
        self.tape.push("scalar_mul", value, Op::ScalarMul(self.id, c), self.tape.requires_grad(self.id))
    }

    /// Multiply by a 1x1 tensor; gradients flow into both operands.
    pub fn scale_by(&self, scalar: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(scalar, "scale_by")?;
        if scalar.rows != 1 || scalar.cols != 1 {
            return Err(shape_err("scale_by", self, scalar));
        }
        let value = self.value().scale(scalar.value().get(0, 0));
        self.tape.push(
            "scale_by",
            value,
            Op::ScaleByScalar(self.id, scalar.id),
            self.binary_requires(scalar),
        )
    }

    /// Broadcast-add a 1 x d bias row onto every row of an n x d matrix.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(bias, "add_bias")?;
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(shape_err("add_bias", self, bias));
        }
        let x = self.value();
        let b = bias.value();
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for ((o, &xv), &bv) in out.row_mut(i).iter_mut().zip(x.row(i)).zip(b.row(0)) {
                *o = xv + bv;
            }
        }
        self.tape.push("add_bias", out, Op::AddBias(self.id, bias.id), self.binary_requires(bias))
    }

    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_tape(other, "concat_cols")?;
        if self.rows != other.rows {
            return Err(shape_err("concat_cols", self, other));
        }
        let (a, b) = (self.value(), other.value());
        let cols = self.cols + other.cols;
        let mut out = Mat::zeros(self.rows, cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(a.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(b.row(i));
        }
        self.tape.push("concat_cols", out, Op::ConcatCols(self.id, other.id), self.binary_requires(other))
    }

    /// Normalize each row to unit Euclidean norm; all-zero rows stay zero.
    pub fn row_l2_normalize(&self) -> Result<Tensor, TensorError> {
        let x = self.value();
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let row = x.row(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (o, &v) in out.row_mut(i).iter_mut().zip(row) {
                    *o = v / norm;
                }
            }
        }
        self.tape.push("row_l2_normalize", out, Op::RowL2Normalize(self.id), self.tape.requires_grad(self.id))
    }

    /// Sum over all entries, producing a 1x1 tensor.
    pub fn reduce_sum(&self) -> Result<Tensor, TensorError> {
        let value = Mat::scalar(self.value().sum());
        self.tape.push("reduce_sum", value, Op::ReduceSum(self.id), self.tape.requires_grad(self.id))
    }

    pub fn transpose(&self) -> Result<Tensor, TensorError> {
        let value = self.value().transpose();
        self.tape.push("transpose", value, Op::Transpose(self.id), self.tape.requires_grad(self.id))
    }

    pub fn relu(&self) -> Result<Tensor, TensorError> {
        let x = self.value();
        {
            let mut inner = self.tape.inner.borrow_mut();
            for &v in x.data() {
                let a = v.abs();
                if a < inner.relu_min_abs {
                    inner.relu_min_abs = a;
                }
            }
        }
        let value = x.map(|v| if v > 0.0 { v } else { 0.0 });
        self.tape.push("relu", value, Op::Relu(self.id), self.tape.requires_grad(self.id))
    }

    pub fn sigmoid(&self) -> Result<Tensor, TensorError> {
        let value = self.value().map(sigmoid);
        self.tape.push("sigmoid", value, Op::Sigmoid(self.id), self.tape.requires_grad(self.id))
    }

    pub fn exp(&self) -> Result<Tensor, TensorError> {
        let value = self.value().map(f64::exp);
        self.tape.push("exp", value, Op::Exp(self.id), self.tape.requires_grad(self.id))
    }

    /// Natural log; inputs must be strictly positive where evaluated.
    pub fn log(&self) -> Result<Tensor, TensorError> {
        let value = self.value().map(f64::ln);
        self.tape.push("log", value, Op::Log(self.id), self.tape.requires_grad(self.id))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Tensor, TensorError> {
        let value = self.value().map(|v| v.clamp(lo, hi));
        self.tape.push("clamp", value, Op::Clamp(self.id, lo, hi), self.tape.requires_grad(self.id))
    }
}

/// Sum of per-entry binary cross-entropy between `logits` and constant
/// `targets`, optionally weighted per entry.
pub fn bce_with_logits_sum(
    logits: &Tensor,
    targets: &Tensor,
    weights: Option<&Tensor>,
) -> Result<Tensor, TensorError> {
    logits.same_tape(targets, "bce_with_logits")?;
    if logits.shape() != targets.shape() {
        return Err(shape_err("bce_with_logits", logits, targets));
    }
    if let Some(w) = weights {
        logits.same_tape(w, "bce_with_logits")?;
        if w.shape() != logits.shape() {
            return Err(shape_err("bce_with_logits", logits, w));
        }
    }
    let x = logits.value();
    let t = targets.value();
    let mut total = 0.0;
    match weights {
        Some(w) => {
            let wv = w.value();
            for ((&xv, &tv), &wvv) in x.data().iter().zip(t.data()).zip(wv.data()) {
                total += wvv * bce_logit(xv, tv);
            }
        }
        None => {
            for (&xv, &tv) in x.data().iter().zip(t.data()) {
                total += bce_logit(xv, tv);
            }
        }
    }
    logits.tape.push(
        "bce_with_logits",
        Mat::scalar(total),
        Op::BceLogits { logits: logits.id, targets: targets.id, weights: weights.map(|w| w.id) },
        logits.tape.requires_grad(logits.id),
    )
}

/// Estimate of the full-entry BCE sum over the Gram matrix of `z`, from
/// `pairs.len()` sampled entries. Only the sampled rows of the Gram product
/// are ever formed. `scale` should be n^2 / count for an unbiased estimate.
pub fn sampled_gram_bce(
    z: &Tensor,
    pairs: Vec<(u32, u32)>,
    targets: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
) -> Result<Tensor, TensorError> {
    if pairs.len() != targets.len() || pairs.len() != weights.len() || pairs.is_empty() {
        return Err(TensorError::Invalid {
            op: "sampled_gram_bce",
            msg: format!(
                "pairs/targets/weights must be equal-length and non-empty ({}/{}/{})",
                pairs.len(),
                targets.len(),
                weights.len()
            ),
        });
    }
    let zv = z.value();
    let n = zv.rows() as u32;
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(TensorError::Invalid {
            op: "sampled_gram_bce",
            msg: format!("pair ({i},{j}) out of range for {n} rows"),
        });
    }
    let mut total = 0.0;
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let (ri, rj) = (zv.row(i as usize), zv.row(j as usize));
        let mut logit = 0.0;
        for (a, b) in ri.iter().zip(rj) {
            logit += a * b;
        }
        total += weights[s] * bce_logit(logit, targets[s]);
    }
    total *= scale;
    z.tape.push(
        "sampled_gram_bce",
        Mat::scalar(total),
        Op::SampledGramBce {
            z: z.id,
            pairs: Arc::new(pairs),
            targets: Arc::new(targets),
            weights: Arc::new(weights),
            scale,
        },
        z.tape.requires_grad(z.id),
    )
}

/// Mean softmax cross-entropy of `logits` rows listed in `mask` against
/// integer `labels`.
pub fn softmax_cross_entropy_masked(
    logits: &Tensor,
    labels: &[usize],
    mask: &[usize],
) -> Result<Tensor, TensorError> {
    if labels.len() != logits.rows {
        return Err(TensorError::Invalid {
            op: "softmax_cross_entropy",
            msg: format!("{} labels for {} rows", labels.len(), logits.rows),
        });
    }
    if mask.is_empty() {
        return Err(TensorError::Invalid { op: "softmax_cross_entropy", msg: "empty mask".into() });
    }
    let x = logits.value();
    if let Some(&i) = mask.iter().find(|&&i| i >= logits.rows) {
        return Err(TensorError::Invalid {
            op: "softmax_cross_entropy",
            msg: format!("mask index {i} out of range"),
        });
    }
    if let Some(&i) = mask.iter().find(|&&i| labels[i] >= logits.cols) {
        return Err(TensorError::Invalid {
            op: "softmax_cross_entropy",
            msg: format!("label {} out of range for {} classes", labels[i], logits.cols),
        });
    }
    let mut total = 0.0;
    for &i in mask {
        let row = x.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - m).exp();
        }
        total += denom.ln() + m - row[labels[i]];
    }
    total /= mask.len() as f64;
    logits.tape.push(
        "softmax_cross_entropy",
        Mat::scalar(total),
        Op::SoftmaxCeMasked {
            logits: logits.id,
            labels: Arc::new(labels.to_vec()),
            mask: Arc::new(mask.to_vec()),
        },
        logits.tape.requires_grad(logits.id),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_with_identity_is_identity_map() {
        let tape = Tape::new();
        let id3 = tape.constant(Mat::identity(3));
        let m = tape.leaf(Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
        let out = id3.matmul(&m).unwrap();
        assert_eq!(*out.value(), *m.value());
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let tape = Tape::new();
        let x = tape.constant(Mat::zeros(2, 2));
        let y = x.sigmoid().unwrap();
        assert!(y.value().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn row_l2_normalize_three_four() {
        let tape = Tape::new();
        let x = tape.leaf(Mat::from_rows(&[&[3.0, 4.0]]));
        let y = x.row_l2_normalize().unwrap();
        assert!((y.value().get(0, 0) - 0.6).abs() < 1e-15);
        assert!((y.value().get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let tape = Tape::new();
        let w = tape.leaf(Mat::from_rows(&[&[0.3, -1.2], &[7.0, 0.0]]));
        let loss = w.reduce_sum().unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(w.grad().unwrap(), Mat::filled(2, 2, 1.0));
    }

    #[test]
    fn backward_of_sum_sigmoid_at_zero_is_quarter() {
        let tape = Tape::new();
        let w = tape.leaf(Mat::zeros(3, 2));
        let loss = w.sigmoid().unwrap().reduce_sum().unwrap();
        tape.backward(&loss).unwrap();
        let g = w.grad().unwrap();
        assert!(g.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let tape = Tape::new();
        let w = tape.leaf(Mat::zeros(2, 2));
        let err = tape.backward(&w).unwrap_err();
        assert!(matches!(err, TensorError::NonScalarLoss { rows: 2, cols: 2 }));
    }

    #[test]
    fn shape_mismatch_names_operands() {
        let tape = Tape::new();
        let a = tape.constant(Mat::zeros(2, 3));
        let b = tape.constant(Mat::zeros(2, 3));
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn log_of_nonpositive_reports_numeric_error() {
        let tape = Tape::new();
        let x = tape.constant(Mat::from_rows(&[&[-1.0]]));
        let err = x.log().unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { op: "log" }));
    }

    #[test]
    fn bce_sum_at_zero_logits_is_n_ln2() {
        let tape = Tape::new();
        let logits = tape.leaf(Mat::zeros(4, 4));
        let targets = tape.constant(Mat::filled(4, 4, 1.0));
        let loss = bce_with_logits_sum(&logits, &targets, None).unwrap();
        assert!((loss.item().unwrap() - 16.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gradients_flow_through_concat_cols() {
        let tape = Tape::new();
        let a = tape.leaf(Mat::from_rows(&[&[1.0], &[2.0]]));
        let b = tape.leaf(Mat::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]));
        let c = a.concat_cols(&b).unwrap();
        assert_eq!(c.shape(), (2, 3));
        let w = tape.constant(Mat::from_rows(&[&[1.0], &[10.0], &[100.0]]));
        let loss = c.matmul(&w).unwrap().reduce_sum().unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), Mat::from_rows(&[&[1.0], &[1.0]]));
        assert_eq!(b.grad().unwrap(), Mat::from_rows(&[&[10.0, 100.0], &[10.0, 100.0]]));
    }
}
