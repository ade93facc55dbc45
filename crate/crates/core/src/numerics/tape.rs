//! Reverse-mode differentiation over a linear tape.
//!
//! Every operation appends a node holding its output value and enough
//! information to push gradients back to its inputs. Nodes are only ever
//! appended, so the tape is already in topological order and the backward
//! pass is a single reverse sweep.

use std::cell::{Ref, RefCell};
use std::collections::BTreeMap;
use std::rc::Rc;

use super::activation::{leaky_relu, sigmoid, softmax_in_place, softplus, Activation, LEAKY_SLOPE};
use super::tensor::{dot, matmul_at_into, matmul_bt_into, matmul_into};
use super::Tensor;
use crate::error::{Error, Result};

/// Clamp applied to probabilities inside the cross-entropy.
pub const PROB_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { a: Var, row: Var },
    Affine { a: Var, scale: f64 },
    ScaleBy { a: Var, s: Var },
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var),
    Softplus(Var),
    Softmax(Var),
    SegmentSoftmax { a: Var, offsets: Rc<[usize]> },
    GatherRows { a: Var, idx: Rc<[usize]> },
    ScatterAddRows { a: Var, idx: Rc<[usize]> },
    ScaleRows { a: Var, w: Var },
    RowDot(Var, Var),
    RowSqNorm(Var),
    ConcatCols { parts: Vec<Var> },
    Sum(Var),
    Mean(Var),
    SumSq(Var),
    Mask { a: Var, mask: Rc<[f64]> },
    Bce { p: Var, labels: Rc<[f64]> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<BTreeMap<String, Var>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var(nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A named trainable leaf. Its gradient is reported under `name`.
    pub fn param(&self, name: &str, value: Tensor) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.params.borrow_mut().insert(name.to_string(), v);
        v
    }

    /// An unnamed trainable leaf, reachable through [`Gradients::wrt`].
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.value(v).shape().to_vec()
    }

    /// First element of a value; meant for scalar losses.
    pub fn item(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (value, m, k, n) = {
            let (av, bv) = (self.value(a), self.value(b));
            let (m, k) = av.dims2()?;
            let (k2, n) = bv.dims2()?;
            if k != k2 {
                return Err(Error::Shape(format!(
                    "matmul of {:?} by {:?}: inner dimensions differ",
                    av.shape(),
                    bv.shape()
                )));
            }
            let mut out = vec![0.0; m * n];
            matmul_into(av.data(), bv.data(), &mut out, m, k, n);
            (Tensor::matrix(m, n, out)?, m, k, n)
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul { a, b, m, k, n }, rg))
    }

    fn zip_same(&self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!("{what} of {:?} and {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same(a, b, "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), self.rg(a) || self.rg(b)))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), self.rg(a) || self.rg(b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), self.rg(a) || self.rg(b)))
    }

    /// Adds a row vector to every row of `a`.
    pub fn add_row(&self, a: Var, row: Var) -> Result<Var> {
        let value = {
            let (av, rv) = (self.value(a), self.value(row));
            let w = av.row_width();
            if rv.len() != w {
                return Err(Error::Shape(format!(
                    "broadcast add of row {:?} onto {:?}",
                    rv.shape(),
                    av.shape()
                )));
            }
            let mut out = av.clone();
            for chunk in out.data_mut().chunks_mut(w) {
                chunk.iter_mut().zip(rv.data()).for_each(|(o, r)| *o += r);
            }
            out
        };
        Ok(self.push(value, Op::AddRow { a, row }, self.rg(a) || self.rg(row)))
    }

    /// `scale * a + shift`.
    pub fn affine(&self, a: Var, scale: f64, shift: f64) -> Var {
        let mut value = self.value(a).clone();
        value.data_mut().iter_mut().for_each(|v| *v = scale * *v + shift);
        self.push(value, Op::Affine { a, scale }, self.rg(a))
    }

    pub fn scale(&self, a: Var, s: f64) -> Var {
        self.affine(a, s, 0.0)
    }

    pub fn one_minus(&self, a: Var) -> Var {
        self.affine(a, -1.0, 1.0)
    }

    /// Multiplies `a` by a recorded scalar `s`.
    pub fn scale_by(&self, a: Var, s: Var) -> Result<Var> {
        let value = {
            let sv = self.value(s);
            if !sv.is_scalar() {
                return Err(Error::Shape(format!("scale_by expects a scalar, got {:?}", sv.shape())));
            }
            let k = sv.data()[0];
            let mut out = self.value(a).clone();
            out.data_mut().iter_mut().for_each(|v| *v *= k);
            out
        };
        Ok(self.push(value, Op::ScaleBy { a, s }, self.rg(a) || self.rg(s)))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let value = self.map(a, sigmoid);
        self.push(value, Op::Sigmoid(a), self.rg(a))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let value = self.map(a, f64::tanh);
        self.push(value, Op::Tanh(a), self.rg(a))
    }

    pub fn leaky_relu(&self, a: Var) -> Var {
        let value = self.map(a, leaky_relu);
        self.push(value, Op::LeakyRelu(a), self.rg(a))
    }

    /// `ln(1 + e^a)`; `softplus(-x)` is `-ln σ(x)`.
    pub fn softplus(&self, a: Var) -> Var {
        let value = self.map(a, softplus);
        self.push(value, Op::Softplus(a), self.rg(a))
    }

    pub fn softmax(&self, a: Var) -> Var {
        let value = Activation::Softmax.apply(&self.value(a));
        self.push(value, Op::Softmax(a), self.rg(a))
    }

    pub fn activate(&self, a: Var, kind: Activation) -> Var {
        match kind {
            Activation::Sigmoid => self.sigmoid(a),
            Activation::Tanh => self.tanh(a),
            Activation::LeakyRelu => self.leaky_relu(a),
            Activation::Softmax => self.softmax(a),
        }
    }

    /// Softmax of a flat score vector within contiguous segments
    /// `offsets[s]..offsets[s + 1]`.
    pub fn segment_softmax(&self, a: Var, offsets: Rc<[usize]>) -> Result<Var> {
        let value = {
            let mut out = self.value(a).clone();
            if offsets.last().copied().unwrap_or(0) != out.len() {
                return Err(Error::Shape(format!(
                    "segment offsets cover {} values, input has {}",
                    offsets.last().copied().unwrap_or(0),
                    out.len()
                )));
            }
            for w in offsets.windows(2) {
                softmax_in_place(&mut out.data_mut()[w[0]..w[1]]);
            }
            out
        };
        Ok(self.push(value, Op::SegmentSoftmax { a, offsets }, self.rg(a)))
    }

    /// Selects rows of `a` (repeats allowed).
    pub fn gather_rows(&self, a: Var, idx: Rc<[usize]>) -> Result<Var> {
        let value = {
            let av = self.value(a);
            let (rows, w) = (av.rows(), av.row_width());
            let mut data = Vec::with_capacity(idx.len() * w);
            for &i in idx.iter() {
                if i >= rows {
                    return Err(Error::Shape(format!("row {i} out of range for {:?}", av.shape())));
                }
                data.extend_from_slice(av.row(i));
            }
            let mut shape = av.shape().to_vec();
            if shape.is_empty() {
                shape.push(1);
            }
            shape[0] = idx.len();
            Tensor::new(shape, data)?
        };
        Ok(self.push(value, Op::GatherRows { a, idx }, self.rg(a)))
    }

    /// Sums row `r` of `a` into output row `idx[r]` of an `n`-row result.
    pub fn scatter_add_rows(&self, a: Var, idx: Rc<[usize]>, n: usize) -> Result<Var> {
        let value = {
            let av = self.value(a);
            if av.rows() != idx.len() {
                return Err(Error::Shape(format!(
                    "scatter of {:?} with {} indices",
                    av.shape(),
                    idx.len()
                )));
            }
            let w = av.row_width();
            let mut data = vec![0.0; n * w];
            for (r, &i) in idx.iter().enumerate() {
                if i >= n {
                    return Err(Error::Shape(format!("scatter target {i} out of range {n}")));
                }
                data[i * w..(i + 1) * w].iter_mut().zip(av.row(r)).for_each(|(o, v)| *o += v);
            }
            let mut shape = av.shape().to_vec();
            shape[0] = n;
            Tensor::new(shape, data)?
        };
        Ok(self.push(value, Op::ScatterAddRows { a, idx }, self.rg(a)))
    }

    /// Scales row `i` of `a` by `w[i]`.
    pub fn scale_rows(&self, a: Var, w: Var) -> Result<Var> {
        let value = {
            let (av, wv) = (self.value(a), self.value(w));
            if av.rows() != wv.len() {
                return Err(Error::Shape(format!("scale_rows of {:?} by {:?}", av.shape(), wv.shape())));
            }
            let width = av.row_width();
            let mut out = av.clone();
            for (chunk, s) in out.data_mut().chunks_mut(width).zip(wv.data()) {
                chunk.iter_mut().for_each(|v| *v *= s);
            }
            out
        };
        Ok(self.push(value, Op::ScaleRows { a, w }, self.rg(a) || self.rg(w)))
    }

    /// Per-row inner products, giving a vector with one entry per row.
    pub fn row_dot(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            if av.shape() != bv.shape() {
                return Err(Error::Shape(format!("row_dot of {:?} and {:?}", av.shape(), bv.shape())));
            }
            let w = av.row_width();
            Tensor::vector(av.data().chunks(w).zip(bv.data().chunks(w)).map(|(x, y)| dot(x, y)).collect())
        };
        Ok(self.push(value, Op::RowDot(a, b), self.rg(a) || self.rg(b)))
    }

    /// Per-row squared L2 norms.
    pub fn row_sq_norm(&self, a: Var) -> Var {
        let value = {
            let av = self.value(a);
            let w = av.row_width();
            Tensor::vector(av.data().chunks(w).map(|x| dot(x, x)).collect())
        };
        self.push(value, Op::RowSqNorm(a), self.rg(a))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of nothing".into()));
        }
        let value = {
            let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
            let rows = values[0].rows();
            if values.iter().any(|v| v.rows() != rows) {
                let shapes: Vec<_> = values.iter().map(|v| v.shape().to_vec()).collect();
                return Err(Error::Shape(format!("concat of row-mismatched {shapes:?}")));
            }
            let width: usize = values.iter().map(|v| v.row_width()).sum();
            let mut data = Vec::with_capacity(rows * width);
            for i in 0..rows {
                for v in &values {
                    data.extend_from_slice(v.row(i));
                }
            }
            Tensor::matrix(rows, width, data)?
        };
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols { parts: parts.to_vec() }, rg))
    }

    pub fn sum(&self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), self.rg(a))
    }

    pub fn mean(&self, a: Var) -> Var {
        let value = {
            let av = self.value(a);
            Tensor::scalar(av.sum() / av.len().max(1) as f64)
        };
        self.push(value, Op::Mean(a), self.rg(a))
    }

    /// Squared L2 norm of all entries.
    pub fn sum_sq(&self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sq_norm());
        self.push(value, Op::SumSq(a), self.rg(a))
    }

    /// Multiplies by a fixed elementwise mask (dropout).
    pub fn mask(&self, a: Var, mask: Rc<[f64]>) -> Result<Var> {
        let value = {
            let av = self.value(a);
            if av.len() != mask.len() {
                return Err(Error::Shape(format!("mask of {} for {:?}", mask.len(), av.shape())));
            }
            let mut out = av.clone();
            out.data_mut().iter_mut().zip(mask.iter()).for_each(|(v, m)| *v *= m);
            out
        };
        Ok(self.push(value, Op::Mask { a, mask }, self.rg(a)))
    }

    /// Mean binary cross-entropy of probabilities `p` against 0/1 labels,
    /// with probabilities clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn bce(&self, p: Var, labels: Rc<[f64]>) -> Result<Var> {
        let value = {
            let pv = self.value(p);
            if pv.len() != labels.len() || labels.is_empty() {
                return Err(Error::Shape(format!(
                    "bce of {} predictions against {} labels",
                    pv.len(),
                    labels.len()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
                return Err(Error::Contract(format!("label {bad} is not 0 or 1")));
            }
            let total: f64 = pv
                .data()
                .iter()
                .zip(labels.iter())
                .map(|(&p, &y)| {
                    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum();
            Tensor::scalar(total / labels.len() as f64)
        };
        Ok(self.push(value, Op::Bce { p, labels }, self.rg(p)))
    }

    /// Runs the reverse sweep from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.into_inner();
        let params = self.params.into_inner();
        if nodes.is_empty() {
            return Err(Error::Contract("backward on an empty tape".into()));
        }
        if !nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut leaves: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
                f(slot);
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    leaves[id] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                    continue;
                }
                &Op::MatMul { a, b, m, k, n } => {
                    send(a, &mut |da| matmul_bt_into(&g, val(b).data(), da, m, k, n));
                    send(b, &mut |db| matmul_at_into(val(a).data(), &g, db, m, k, n));
                }
                &Op::Add(a, b) => {
                    send(a, &mut |da| axpy(da, 1.0, &g));
                    send(b, &mut |db| axpy(db, 1.0, &g));
                }
                &Op::Sub(a, b) => {
                    send(a, &mut |da| axpy(da, 1.0, &g));
                    send(b, &mut |db| axpy(db, -1.0, &g));
                }
                &Op::Mul(a, b) => {
                    send(a, &mut |da| fold3(da, &g, val(b).data(), |gi, bi| gi * bi));
                    send(b, &mut |db| fold3(db, &g, val(a).data(), |gi, ai| gi * ai));
                }
                &Op::AddRow { a, row } => {
                    send(a, &mut |da| axpy(da, 1.0, &g));
                    send(row, &mut |dr| {
                        let w = dr.len();
                        for chunk in g.chunks(w) {
                            axpy(dr, 1.0, chunk);
                        }
                    });
                }
                &Op::Affine { a, scale } => send(a, &mut |da| axpy(da, scale, &g)),
                &Op::ScaleBy { a, s } => {
                    let k = val(s).data()[0];
                    send(a, &mut |da| axpy(da, k, &g));
                    send(s, &mut |ds| ds[0] += dot(&g, val(a).data()));
                }
                &Op::Sigmoid(a) => {
                    send(a, &mut |da| fold3(da, &g, node.value.data(), |gi, y| gi * y * (1.0 - y)))
                }
                &Op::Tanh(a) => send(a, &mut |da| fold3(da, &g, node.value.data(), |gi, y| gi * (1.0 - y * y))),
                &Op::LeakyRelu(a) => send(a, &mut |da| {
                    fold3(da, &g, val(a).data(), |gi, x| if x > 0.0 { gi } else { gi * LEAKY_SLOPE })
                }),
                &Op::Softplus(a) => send(a, &mut |da| fold3(da, &g, val(a).data(), |gi, x| gi * sigmoid(x))),
                &Op::Softmax(a) => {
                    let w = node.value.last_dim().max(1);
                    send(a, &mut |da| softmax_backward(da, &g, node.value.data(), (0..=g.len()).step_by(w)));
                }
                Op::SegmentSoftmax { a, offsets } => {
                    send(*a, &mut |da| softmax_backward(da, &g, node.value.data(), offsets.iter().copied()))
                }
                Op::GatherRows { a, idx } => send(*a, &mut |da| {
                    let w = val(*a).row_width();
                    for (r, &i) in idx.iter().enumerate() {
                        axpy(&mut da[i * w..(i + 1) * w], 1.0, &g[r * w..(r + 1) * w]);
                    }
                }),
                Op::ScatterAddRows { a, idx } => send(*a, &mut |da| {
                    let w = val(*a).row_width();
                    for (r, &i) in idx.iter().enumerate() {
                        axpy(&mut da[r * w..(r + 1) * w], 1.0, &g[i * w..(i + 1) * w]);
                    }
                }),
                &Op::ScaleRows { a, w } => {
                    let width = val(a).row_width();
                    send(a, &mut |da| {
                        for ((d, gr), s) in da.chunks_mut(width).zip(g.chunks(width)).zip(val(w).data()) {
                            axpy(d, *s, gr);
                        }
                    });
                    send(w, &mut |dw| {
                        for ((d, gr), ar) in dw.iter_mut().zip(g.chunks(width)).zip(val(a).data().chunks(width)) {
                            *d += dot(gr, ar);
                        }
                    });
                }
                &Op::RowDot(a, b) => {
                    let width = val(a).row_width();
                    send(a, &mut |da| {
                        for ((d, gi), br) in da.chunks_mut(width).zip(&g).zip(val(b).data().chunks(width)) {
                            axpy(d, *gi, br);
                        }
                    });
                    send(b, &mut |db| {
                        for ((d, gi), ar) in db.chunks_mut(width).zip(&g).zip(val(a).data().chunks(width)) {
                            axpy(d, *gi, ar);
                        }
                    });
                }
                &Op::RowSqNorm(a) => {
                    let width = val(a).row_width();
                    send(a, &mut |da| {
                        for ((d, gi), ar) in da.chunks_mut(width).zip(&g).zip(val(a).data().chunks(width)) {
                            axpy(d, 2.0 * gi, ar);
                        }
                    });
                }
                Op::ConcatCols { parts } => {
                    let total = node.value.row_width();
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).row_width();
                        send(p, &mut |dp| {
                            for (d, gr) in dp.chunks_mut(w).zip(g.chunks(total)) {
                                axpy(d, 1.0, &gr[offset..offset + w]);
                            }
                        });
                        offset += w;
                    }
                }
                &Op::Sum(a) => send(a, &mut |da| da.iter_mut().for_each(|d| *d += g[0])),
                &Op::Mean(a) => {
                    let s = g[0] / val(a).len().max(1) as f64;
                    send(a, &mut |da| da.iter_mut().for_each(|d| *d += s));
                }
                &Op::SumSq(a) => send(a, &mut |da| axpy(da, 2.0 * g[0], val(a).data())),
                Op::Mask { a, mask } => send(*a, &mut |da| fold3(da, &g, mask, |gi, m| gi * m)),
                Op::Bce { p, labels } => {
                    let m = labels.len() as f64;
                    send(*p, &mut |dp| {
                        for ((d, &pv), &y) in dp.iter_mut().zip(val(*p).data()).zip(labels.iter()) {
                            if pv > PROB_EPS && pv < 1.0 - PROB_EPS {
                                *d += g[0] * (-y / pv + (1.0 - y) / (1.0 - pv)) / m;
                            }
                        }
                    });
                }
            }
        }

        let by_name = params.into_iter().filter_map(|(name, v)| leaves[v.0].clone().map(|t| (name, t))).collect();
        Ok(Gradients { leaves, by_name })
    }
}

#[inline]
fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += alpha * s);
}

#[inline]
fn fold3(dst: &mut [f64], g: &[f64], other: &[f64], f: impl Fn(f64, f64) -> f64) {
    dst.iter_mut().zip(g).zip(other).for_each(|((d, gi), o)| *d += f(*gi, *o));
}

fn softmax_backward(da: &mut [f64], g: &[f64], y: &[f64], bounds: impl Iterator<Item = usize>) {
    let bounds: Vec<usize> = bounds.collect();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let inner = dot(&g[lo..hi], &y[lo..hi]);
        for j in lo..hi {
            da[j] += y[j] * (g[j] - inner);
        }
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
    by_name: BTreeMap<String, Tensor>,
}

impl Gradients {
    /// Builds a gradient set directly from named tensors.
    pub fn from_named(by_name: BTreeMap<String, Tensor>) -> Self {
        Self { leaves: Vec::new(), by_name }
    }

    /// Gradient of a trainable leaf; `None` if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    pub fn named(&self) -> &BTreeMap<String, Tensor> {
        &self.by_name
    }
}
