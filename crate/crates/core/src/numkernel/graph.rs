//! Tape-based reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Graph`] records each operation as it is evaluated. Calling
//! [`Graph::backward`] on a 1×1 node walks the tape in reverse and returns
//! the gradient of that scalar with respect to every node. Parameters enter
//! the graph through [`ParamStore::bind`](super::ParamStore::bind) and read
//! their gradients back with
//! [`ParamStore::accumulate`](super::ParamStore::accumulate).
//!
//! The op set is deliberately small: it covers the mapping network, the
//! alignment and reconstruction losses, the context-relative distance and
//! the classification heads, and nothing else.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{dot, norm, Tensor2};
use crate::error::{Error, Result};

/// Layer-norm variance epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Unfold {
        x: Var,
        width: usize,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    Tanh(Var),
    Sigmoid(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        xhat: Tensor2,
        inv_std: Vec<f64>,
    },
    Cosine {
        a: Var,
        b: Var,
        a_norms: Vec<f64>,
        b_norms: Vec<f64>,
    },
    Mean(Var),
    MeanRows(Var),
    Mae(Var, Var),
    Mse(Var, Var),
    SoftmaxXent {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor2,
    },
}

struct Node {
    value: Tensor2,
    op: Op,
}

/// Recorded computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor2> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &'static str, expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::Shape {
        op,
        expected,
        found,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor2, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Inserts a leaf (input or parameter value).
    pub fn leaf(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor2 {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor2::from_vec(va.rows(), va.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip(a, b, |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip(a, b, |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip(a, b, |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a 1×c row to every row of an r×c matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(shape_err("add_row", (1, va.cols()), vr.shape()));
        }
        let mut out = va.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(vr.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    /// Same-padded sliding window over rows: output row `t` is the
    /// concatenation of input rows `t - width/2 ..= t + width/2`, with zero
    /// rows beyond the sequence ends. Followed by a matmul this is a 1-D
    /// convolution along the token axis.
    pub fn unfold(&mut self, x: Var, width: usize) -> Result<Var> {
        if width == 0 || width % 2 == 0 {
            return Err(Error::Invalid(format!("filter width must be odd, got {width}")));
        }
        let vx = self.value(x);
        let (d, c) = vx.shape();
        let half = (width / 2) as isize;
        let mut out = Tensor2::zeros(d, width * c);
        for t in 0..d {
            for o in 0..width {
                let src = t as isize + o as isize - half;
                if src < 0 || src >= d as isize {
                    continue;
                }
                out.row_mut(t)[o * c..(o + 1) * c].copy_from_slice(vx.row(src as usize));
            }
        }
        Ok(self.push(out, Op::Unfold { x, width }))
    }

    /// Row lookup into an embedding table.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let vt = self.value(table);
        let mut out = Tensor2::zeros(ids.len(), vt.cols());
        for (r, &id) in ids.iter().enumerate() {
            if id >= vt.rows() {
                return Err(Error::IdOutOfRange {
                    id: id as u32,
                    size: vt.rows(),
                });
            }
            out.row_mut(r).copy_from_slice(vt.row(id));
        }
        Ok(self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Row-wise layer normalization with 1×c gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let vx = self.value(x);
        let (rows, cols) = vx.shape();
        if cols == 0 {
            return Err(Error::Empty("layer_norm over zero columns"));
        }
        for p in [gain, bias] {
            let s = self.value(p).shape();
            if s != (1, cols) {
                return Err(shape_err("layer_norm", (1, cols), s));
            }
        }
        let (xhat, inv_std) = normalize_rows(vx);
        let mut scaled = xhat.clone();
        let g = self.value(gain).data().to_vec();
        for r in 0..rows {
            for (o, gv) in scaled.row_mut(r).iter_mut().zip(&g) {
                *o *= gv;
            }
        }
        let normed = self.push(
            scaled,
            Op::LayerNorm {
                x,
                gain,
                xhat,
                inv_std,
            },
        );
        self.add_row(normed, bias)
    }

    /// Pairwise cosine similarity between the rows of `a` (r×n) and the rows
    /// of `b` (k×n), giving r×k.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() {
            return Err(shape_err("cosine", (vb.rows(), va.cols()), vb.shape()));
        }
        let a_norms = row_norms(va, "cosine")?;
        let b_norms = row_norms(vb, "cosine")?;
        let mut out = va.matmul_t(vb)?;
        for i in 0..out.rows() {
            for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                *o /= a_norms[i] * b_norms[j];
            }
        }
        Ok(self.push(
            out,
            Op::Cosine {
                a,
                b,
                a_norms,
                b_norms,
            },
        ))
    }

    /// Mean over all entries, 1×1.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.data().is_empty() {
            return Err(Error::Empty("mean"));
        }
        let m = va.data().iter().sum::<f64>() / va.data().len() as f64;
        Ok(self.push(Tensor2::scalar(m), Op::Mean(a)))
    }

    /// Column means over rows, 1×c.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.rows() == 0 {
            return Err(Error::Empty("mean_rows"));
        }
        let mut out = Tensor2::zeros(1, va.cols());
        for r in va.iter_rows() {
            for (o, v) in out.data_mut().iter_mut().zip(r) {
                *o += v;
            }
        }
        let inv = 1.0 / va.rows() as f64;
        out.data_mut().iter_mut().for_each(|v| *v *= inv);
        Ok(self.push(out, Op::MeanRows(a)))
    }

    /// Mean absolute error, 1×1.
    pub fn mae(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mae", a, b)?;
        let n = self.value(a).data().len();
        if n == 0 {
            return Err(Error::Empty("mae"));
        }
        let s: f64 = self.zip(a, b, |x, y| (x - y).abs()).data().iter().sum();
        Ok(self.push(Tensor2::scalar(s / n as f64), Op::Mae(a, b)))
    }

    /// Mean squared error, 1×1.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let n = self.value(a).data().len();
        if n == 0 {
            return Err(Error::Empty("mse"));
        }
        let s: f64 = self.zip(a, b, |x, y| (x - y) * (x - y)).data().iter().sum();
        Ok(self.push(Tensor2::scalar(s / n as f64), Op::Mse(a, b)))
    }

    /// Row-wise softmax cross-entropy averaged over rows, 1×1.
    pub fn softmax_xent(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let vl = self.value(logits);
        if vl.rows() != targets.len() {
            return Err(shape_err("softmax_xent", (targets.len(), vl.cols()), vl.shape()));
        }
        if vl.rows() == 0 {
            return Err(Error::Empty("softmax_xent"));
        }
        let probs = softmax_rows(vl);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= vl.cols() {
                return Err(Error::Invalid(format!(
                    "target class {t} out of range for {} classes",
                    vl.cols()
                )));
            }
            loss -= log_softmax_at(vl.row(r), t);
        }
        loss /= targets.len() as f64;
        Ok(self.push(
            Tensor2::scalar(loss),
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Gradient of the 1×1 node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(shape_err("backward", (1, 1), shape));
        }
        if !self.value(loss).item().is_finite() {
            return Err(Error::NonFinite(format!("loss = {}", self.value(loss).item())));
        }
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor2::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor2, grads: &mut [Option<Tensor2>]) -> Result<()> {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, t: Tensor2| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul_t(vb)?);
                acc(*b, va.t_matmul(g)?);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, hadamard(g, vb));
                acc(*b, hadamard(g, va));
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut gr = Tensor2::zeros(1, g.cols());
                for r in g.iter_rows() {
                    for (o, v) in gr.data_mut().iter_mut().zip(r) {
                        *o += v;
                    }
                }
                acc(*row, gr);
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * s)),
            Op::Unfold { x, width } => {
                let (d, c) = self.value(*x).shape();
                let half = (*width / 2) as isize;
                let mut gx = Tensor2::zeros(d, c);
                for t in 0..d {
                    for o in 0..*width {
                        let src = t as isize + o as isize - half;
                        if src < 0 || src >= d as isize {
                            continue;
                        }
                        let piece = &g.row(t)[o * c..(o + 1) * c];
                        for (dst, v) in gx.row_mut(src as usize).iter_mut().zip(piece) {
                            *dst += v;
                        }
                    }
                }
                acc(*x, gx);
            }
            Op::Gather { table, ids } => {
                let (v, h) = self.value(*table).shape();
                let mut gt = Tensor2::zeros(v, h);
                for (r, &id) in ids.iter().enumerate() {
                    for (dst, val) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                        *dst += val;
                    }
                }
                acc(*table, gt);
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let data = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect();
                acc(*a, Tensor2::from_vec(g.rows(), g.cols(), data)?);
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let data = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect();
                acc(*a, Tensor2::from_vec(g.rows(), g.cols(), data)?);
            }
            Op::LayerNorm {
                x,
                gain,
                xhat,
                inv_std,
            } => {
                let gv = self.value(*gain).data();
                let (rows, cols) = xhat.shape();
                let n = cols as f64;
                let mut gx = Tensor2::zeros(rows, cols);
                let mut ggain = Tensor2::zeros(1, cols);
                for r in 0..rows {
                    let dy = g.row(r);
                    let xh = xhat.row(r);
                    for c in 0..cols {
                        ggain.data_mut()[c] += dy[c] * xh[c];
                    }
                    let dxhat: Vec<f64> = dy.iter().zip(gv).map(|(a, b)| a * b).collect();
                    let sum_d: f64 = dxhat.iter().sum();
                    let sum_dx: f64 = dot(&dxhat, xh);
                    let k = inv_std[r] / n;
                    for (c, out) in gx.row_mut(r).iter_mut().enumerate() {
                        *out = k * (n * dxhat[c] - sum_d - xh[c] * sum_dx);
                    }
                }
                acc(*x, gx);
                acc(*gain, ggain);
            }
            Op::Cosine {
                a,
                b,
                a_norms,
                b_norms,
            } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let cos = &node.value;
                // d cos_ij / d a_i = b_j / (|a_i||b_j|) - cos_ij * a_i / |a_i|^2
                let mut ga = Tensor2::zeros(va.rows(), va.cols());
                let mut gb = Tensor2::zeros(vb.rows(), vb.cols());
                for i in 0..va.rows() {
                    for j in 0..vb.rows() {
                        let gij = g.get(i, j);
                        if gij == 0.0 {
                            continue;
                        }
                        let cij = cos.get(i, j);
                        let inv_ab = 1.0 / (a_norms[i] * b_norms[j]);
                        let inv_aa = 1.0 / (a_norms[i] * a_norms[i]);
                        let inv_bb = 1.0 / (b_norms[j] * b_norms[j]);
                        let (ai, bj) = (va.row(i), vb.row(j));
                        for c in 0..va.cols() {
                            ga.row_mut(i)[c] += gij * (bj[c] * inv_ab - cij * ai[c] * inv_aa);
                        }
                        for c in 0..vb.cols() {
                            gb.row_mut(j)[c] += gij * (ai[c] * inv_ab - cij * bj[c] * inv_bb);
                        }
                    }
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Mean(a) => {
                let va = self.value(*a);
                let s = g.item() / va.data().len() as f64;
                acc(*a, Tensor2::filled(va.rows(), va.cols(), s));
            }
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let inv = 1.0 / va.rows() as f64;
                let mut ga = Tensor2::zeros(va.rows(), va.cols());
                for r in 0..va.rows() {
                    for (o, v) in ga.row_mut(r).iter_mut().zip(g.data()) {
                        *o = v * inv;
                    }
                }
                acc(*a, ga);
            }
            Op::Mae(a, b) => {
                let n = self.value(*a).data().len() as f64;
                let s = g.item() / n;
                let ga = self.zip(*a, *b, |x, y| s * sign(x - y));
                acc(*b, ga.map(|v| -v));
                acc(*a, ga);
            }
            Op::Mse(a, b) => {
                let n = self.value(*a).data().len() as f64;
                let s = 2.0 * g.item() / n;
                let ga = self.zip(*a, *b, |x, y| s * (x - y));
                acc(*b, ga.map(|v| -v));
                acc(*a, ga);
            }
            Op::SoftmaxXent {
                logits,
                targets,
                probs,
            } => {
                let s = g.item() / targets.len() as f64;
                let mut gl = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    let row = gl.row_mut(r);
                    row[t] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= s);
                }
                acc(*logits, gl);
            }
        }
        Ok(())
    }
}

fn hadamard(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor2::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn row_norms(t: &Tensor2, op: &'static str) -> Result<Vec<f64>> {
    t.iter_rows()
        .map(|r| {
            let n = norm(r);
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(Error::Degenerate(op))
            }
        })
        .collect()
}

/// Zero-mean, unit-variance rows (pre-affine), returning the normalized
/// matrix and each row's `1/sqrt(var + eps)`.
pub(crate) fn normalize_rows(x: &Tensor2) -> (Tensor2, Vec<f64>) {
    let (rows, cols) = x.shape();
    let n = cols as f64;
    let mut xhat = Tensor2::zeros(rows, cols);
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        inv_std[r] = is;
        for (o, v) in xhat.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
    }
    (xhat, inv_std)
}

fn log_softmax_at(row: &[f64], t: usize) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(row.iter().map(|v| libm::exp(v - m)).sum::<f64>());
    row[t] - lse
}

/// Row-wise softmax.
pub fn softmax_rows(t: &Tensor2) -> Tensor2 {
    let mut out = t.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - m);
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}
