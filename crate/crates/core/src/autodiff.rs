//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every operation as it is evaluated. Handles
//! ([`Tensor`]) are plain indices into the tape, so building expressions never
//! clones matrices. [`Graph::backward`] walks the tape once in reverse.
//!
//! Shape errors inside the tape are programming errors and panic; callers
//! that accept user-shaped input validate before recording.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Transpose(Tensor),
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    AddRowVector(Tensor, Tensor),
    ScaleRows(Tensor, Vec<f64>),
    Scale(Tensor, f64),
    Relu(Tensor),
    Sum(Tensor),
    SumRows(Tensor),
    SumCols(Tensor),
    Sqrt(Tensor),
    LnClamped(Tensor, f64),
    Exp(Tensor),
    SoftmaxRows(Tensor),
    NormalizeRows(Tensor),
    GatherRows(Tensor, Vec<usize>),
    ConcatRows(Vec<Tensor>),
    /// Keeps the masked softmax of its input for the backward pass.
    LogSumExpMasked(Tensor, Matrix),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRowVector(..) => "add_row_vector",
            Op::ScaleRows(..) => "scale_rows",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::Sum(..) => "sum",
            Op::SumRows(..) => "sum_rows",
            Op::SumCols(..) => "sum_cols",
            Op::Sqrt(..) => "sqrt",
            Op::LnClamped(..) => "ln",
            Op::Exp(..) => "exp",
            Op::SoftmaxRows(..) => "softmax",
            Op::NormalizeRows(..) => "normalize_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::ConcatRows(..) => "concat_rows",
            Op::LogSumExpMasked(..) => "logsumexp",
        }
    }

    fn inputs(&self) -> Vec<Tensor> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRowVector(a, b) => {
                vec![*a, *b]
            }
            Op::ConcatRows(parts) => parts.clone(),
            Op::Transpose(a)
            | Op::ScaleRows(a, _)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Sum(a)
            | Op::SumRows(a)
            | Op::SumCols(a)
            | Op::Sqrt(a)
            | Op::LnClamped(a, _)
            | Op::Exp(a)
            | Op::SoftmaxRows(a)
            | Op::NormalizeRows(a)
            | Op::GatherRows(a, _)
            | Op::LogSumExpMasked(a, _) => vec![*a],
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    first_non_finite: Option<usize>,
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

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        self.nodes[t.0].value.shape()
    }

    pub fn scalar(&self, t: Tensor) -> f64 {
        let v = self.value(t);
        assert_eq!(v.shape(), (1, 1), "not a scalar");
        v.data[0]
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Tensor {
        if self.first_non_finite.is_none() && !value.is_finite() {
            self.first_non_finite = Some(self.nodes.len());
        }
        self.nodes.push(Node { value, op, requires_grad });
        Tensor(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Matrix, op: Op) -> Tensor {
        let requires_grad = op.inputs().iter().any(|t| self.nodes[t.0].requires_grad);
        self.push(value, op, requires_grad)
    }

    /// Name and index of the first operation whose output was NaN or infinite.
    pub fn non_finite(&self) -> Option<String> {
        self.first_non_finite.map(|i| format!("{} (node {i})", self.nodes[i].op.name()))
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let v = self.value(a).matmul(self.value(b));
        self.push_op(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).transpose();
        self.push_op(v, Op::Transpose(a))
    }

    fn zip(&self, a: Tensor, b: Tensor, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "elementwise shapes differ");
        Matrix::from_vec(x.rows, x.cols, x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect())
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let v = self.zip(a, b, |p, q| p + q);
        self.push_op(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let v = self.zip(a, b, |p, q| p - q);
        self.push_op(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let v = self.zip(a, b, |p, q| p * q);
        self.push_op(v, Op::Mul(a, b))
    }

    /// Adds a `1 x c` row vector to every row of `a`.
    pub fn add_row_vector(&mut self, a: Tensor, row: Tensor) -> Tensor {
        let (x, b) = (self.value(a), self.value(row));
        assert_eq!(b.rows, 1, "bias must be a row vector");
        assert_eq!(x.cols, b.cols, "bias width differs");
        let mut v = x.clone();
        for i in 0..v.rows {
            for (o, &bb) in v.row_mut(i).iter_mut().zip(&b.data) {
                *o += bb;
            }
        }
        self.push_op(v, Op::AddRowVector(a, row))
    }

    /// Multiplies row `i` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Tensor, factors: Vec<f64>) -> Tensor {
        let mut v = self.value(a).clone();
        assert_eq!(v.rows, factors.len(), "one factor per row");
        for (i, &f) in factors.iter().enumerate() {
            v.row_mut(i).iter_mut().for_each(|x| *x *= f);
        }
        self.push_op(v, Op::ScaleRows(a, factors))
    }

    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        let v = self.value(a).map(|x| x * c);
        self.push_op(v, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push_op(v, Op::Relu(a))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let s = self.value(a).data.iter().sum();
        self.push_op(Matrix::from_vec(1, 1, vec![s]), Op::Sum(a))
    }

    /// Column sums as a `1 x c` row.
    pub fn sum_rows(&mut self, a: Tensor) -> Tensor {
        let x = self.value(a);
        let mut v = Matrix::zeros(1, x.cols);
        for i in 0..x.rows {
            for (o, &e) in v.data.iter_mut().zip(x.row(i)) {
                *o += e;
            }
        }
        self.push_op(v, Op::SumRows(a))
    }

    /// Row sums as an `r x 1` column.
    pub fn sum_cols(&mut self, a: Tensor) -> Tensor {
        let x = self.value(a);
        let v = Matrix::from_vec(x.rows, 1, (0..x.rows).map(|i| x.row(i).iter().sum()).collect());
        self.push_op(v, Op::SumCols(a))
    }

    /// Elementwise square root; the gradient at zero is taken as zero.
    pub fn sqrt(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).map(f64::sqrt);
        self.push_op(v, Op::Sqrt(a))
    }

    /// `ln(max(x, eps))`; no gradient flows through clamped entries.
    pub fn ln_clamped(&mut self, a: Tensor, eps: f64) -> Tensor {
        let v = self.value(a).map(|x| x.max(eps).ln());
        self.push_op(v, Op::LnClamped(a, eps))
    }

    pub fn exp(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).map(f64::exp);
        self.push_op(v, Op::Exp(a))
    }

    pub fn softmax_rows(&mut self, a: Tensor) -> Tensor {
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            softmax_in_place(v.row_mut(i));
        }
        self.push_op(v, Op::SoftmaxRows(a))
    }

    /// Scales each row to unit l2 norm. Rows must be nonzero.
    pub fn normalize_rows(&mut self, a: Tensor) -> Tensor {
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            let norm = v.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            v.row_mut(i).iter_mut().for_each(|x| *x /= norm);
        }
        self.push_op(v, Op::NormalizeRows(a))
    }

    pub fn gather_rows(&mut self, a: Tensor, idx: Vec<usize>) -> Tensor {
        let v = self.value(a).select_rows(&idx);
        self.push_op(v, Op::GatherRows(a, idx))
    }

    pub fn concat_rows(&mut self, parts: Vec<Tensor>) -> Tensor {
        assert!(!parts.is_empty(), "nothing to concatenate");
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in &parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat widths differ");
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        self.push_op(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts))
    }

    /// Row-wise `log sum exp` restricted to entries where `mask` is true.
    /// Every row must have at least one selected entry.
    pub fn logsumexp_masked(&mut self, a: Tensor, mask: Vec<bool>) -> Tensor {
        let x = self.value(a);
        assert_eq!(mask.len(), x.data.len(), "mask size differs");
        let mut out = Vec::with_capacity(x.rows);
        let mut probs = Matrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let row = x.row(i);
            let sel = &mask[i * x.cols..(i + 1) * x.cols];
            let max = row.iter().zip(sel).filter(|(_, &s)| s).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
            assert!(max > f64::NEG_INFINITY || max.is_nan(), "row {i} has no selected entries");
            let p = probs.row_mut(i);
            let mut s = 0.0;
            for ((pj, &v), &on) in p.iter_mut().zip(row).zip(sel) {
                if on {
                    *pj = (v - max).exp();
                    s += *pj;
                }
            }
            p.iter_mut().for_each(|pj| *pj /= s);
            out.push(max + s.ln());
        }
        let rows = out.len();
        self.push_op(Matrix::from_vec(rows, 1, out), Op::LogSumExpMasked(a, probs))
    }

    /// Reverse sweep from a scalar `loss`. Every differentiable leaf gets a
    /// gradient; leaves the loss does not reach get zeros.
    pub fn backward(&self, loss: Tensor) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Shape(format!("loss must be 1x1, got {r}x{c}")));
        }
        if let Some(bad) = self.non_finite() {
            return Err(Error::NonFinite(bad));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[idx] = Some(upstream);
                continue;
            }
            self.propagate(node, &upstream, &mut grads);
            // Interior gradients are not kept.
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad && grads[i].is_none() {
                let (r, c) = node.value.shape();
                grads[i] = Some(Matrix::zeros(r, c));
            }
        }
        if let Some(pos) = grads.iter().position(|g| g.as_ref().is_some_and(|m| !m.is_finite())) {
            return Err(Error::NonFinite(format!("gradient of node {pos}")));
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, up: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |t: Tensor, g: Matrix| {
            if !self.nodes[t.0].requires_grad {
                return;
            }
            match &mut grads[t.0] {
                Some(existing) => existing.data.iter_mut().zip(&g.data).for_each(|(e, x)| *e += x),
                slot @ None => *slot = Some(g),
            }
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    acc(*a, up.matmul_transposed(vb));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, va.transposed_matmul(up));
                }
            }
            Op::Transpose(a) => acc(*a, up.transpose()),
            Op::Add(a, b) => {
                acc(*a, up.clone());
                acc(*b, up.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, up.clone());
                acc(*b, up.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    acc(*a, hadamard(up, vb));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, hadamard(up, va));
                }
            }
            Op::AddRowVector(a, row) => {
                acc(*a, up.clone());
                let mut g = Matrix::zeros(1, up.cols);
                for i in 0..up.rows {
                    for (o, &e) in g.data.iter_mut().zip(up.row(i)) {
                        *o += e;
                    }
                }
                acc(*row, g);
            }
            Op::ScaleRows(a, factors) => {
                let mut g = up.clone();
                for (i, &f) in factors.iter().enumerate() {
                    g.row_mut(i).iter_mut().for_each(|x| *x *= f);
                }
                acc(*a, g);
            }
            Op::Scale(a, c) => acc(*a, up.map(|x| x * c)),
            Op::Relu(a) => {
                let x = self.value(*a);
                let g = Matrix::from_vec(
                    up.rows,
                    up.cols,
                    up.data.iter().zip(&x.data).map(|(&u, &v)| if v > 0.0 { u } else { 0.0 }).collect(),
                );
                acc(*a, g);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                acc(*a, Matrix::filled(r, c, up.data[0]));
            }
            Op::SumRows(a) => {
                let (r, c) = self.shape(*a);
                let mut g = Matrix::zeros(r, c);
                for i in 0..r {
                    g.row_mut(i).copy_from_slice(&up.data);
                }
                acc(*a, g);
            }
            Op::SumCols(a) => {
                let (r, c) = self.shape(*a);
                let mut g = Matrix::zeros(r, c);
                for i in 0..r {
                    g.row_mut(i).iter_mut().for_each(|x| *x = up.data[i]);
                }
                acc(*a, g);
            }
            Op::Sqrt(a) => {
                let g = Matrix::from_vec(
                    up.rows,
                    up.cols,
                    up.data.iter().zip(&y.data).map(|(&u, &s)| if s > 0.0 { u / (2.0 * s) } else { 0.0 }).collect(),
                );
                acc(*a, g);
            }
            Op::LnClamped(a, eps) => {
                let x = self.value(*a);
                let g = Matrix::from_vec(
                    up.rows,
                    up.cols,
                    up.data.iter().zip(&x.data).map(|(&u, &v)| if v > *eps { u / v } else { 0.0 }).collect(),
                );
                acc(*a, g);
            }
            Op::Exp(a) => acc(*a, hadamard(up, y)),
            Op::SoftmaxRows(a) => {
                let mut g = Matrix::zeros(y.rows, y.cols);
                for i in 0..y.rows {
                    let (yr, ur) = (y.row(i), up.row(i));
                    let dot: f64 = yr.iter().zip(ur).map(|(p, q)| p * q).sum();
                    for (j, o) in g.row_mut(i).iter_mut().enumerate() {
                        *o = yr[j] * (ur[j] - dot);
                    }
                }
                acc(*a, g);
            }
            Op::NormalizeRows(a) => {
                let x = self.value(*a);
                let mut g = Matrix::zeros(y.rows, y.cols);
                for i in 0..y.rows {
                    let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let (yr, ur) = (y.row(i), up.row(i));
                    let dot: f64 = yr.iter().zip(ur).map(|(p, q)| p * q).sum();
                    for (j, o) in g.row_mut(i).iter_mut().enumerate() {
                        *o = (ur[j] - yr[j] * dot) / norm;
                    }
                }
                acc(*a, g);
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = self.shape(*a);
                let mut g = Matrix::zeros(r, c);
                for (k, &src) in idx.iter().enumerate() {
                    for (o, &e) in g.row_mut(src).iter_mut().zip(up.row(k)) {
                        *o += e;
                    }
                }
                acc(*a, g);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    let g = Matrix::from_vec(r, c, up.data[offset * c..(offset + r) * c].to_vec());
                    offset += r;
                    acc(p, g);
                }
            }
            Op::LogSumExpMasked(a, probs) => {
                let mut g = probs.clone();
                for i in 0..g.rows {
                    let u = up.data[i];
                    g.row_mut(i).iter_mut().for_each(|x| *x *= u);
                }
                acc(*a, g);
            }
        }
    }
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_vec(a.rows, a.cols, a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect())
}

/// Max-shifted softmax over a slice.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}

/// Gradients of every differentiable leaf reachable from a backward pass.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for a leaf created with [`Graph::param`].
    pub fn get(&self, t: Tensor) -> Option<&Matrix> {
        self.grads.get(t.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, t: Tensor) -> Option<Matrix> {
        self.grads.get_mut(t.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let w = g.param(Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]));
        let s = g.sum(w);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(w).unwrap().data, vec![1.0; 4]);
    }

    #[test]
    fn squared_norm_gives_two_x() {
        let mut g = Graph::new();
        let x = g.param(Matrix::from_rows(&[[1.5, -2.0, 0.25]]));
        let sq = g.mul(x, x);
        let s = g.sum(sq);
        assert_eq!(g.scalar(s), 1.5 * 1.5 + 4.0 + 0.0625);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data, vec![3.0, -4.0, 0.5]);
    }

    #[test]
    fn unreached_params_get_zero() {
        let mut g = Graph::new();
        let x = g.param(Matrix::filled(2, 2, 1.0));
        let unused = g.param(Matrix::filled(3, 1, 7.0));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(unused).unwrap(), &Matrix::zeros(3, 1));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.param(Matrix::filled(2, 2, 1.0));
        assert!(matches!(g.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn nan_trips_error() {
        let mut g = Graph::new();
        let x = g.param(Matrix::filled(1, 1, -1.0));
        let r = g.sqrt(x);
        let s = g.sum(r);
        assert!(g.non_finite().is_some());
        assert!(matches!(g.backward(s), Err(Error::NonFinite(_))));
    }

    fn fd_check(build: impl Fn(&mut Graph, Tensor) -> Tensor, x0: Matrix) {
        let mut g = Graph::new();
        let x = g.param(x0.clone());
        let out = build(&mut g, x);
        let analytic = g.backward(out).unwrap().get(x).unwrap().clone();
        let h = 1e-6;
        for k in 0..x0.data.len() {
            let eval = |delta: f64| {
                let mut xp = x0.clone();
                xp.data[k] += delta;
                let mut g = Graph::new();
                let x = g.param(xp);
                let out = build(&mut g, x);
                g.scalar(out)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let err = (numeric - analytic.data[k]).abs() / numeric.abs().max(analytic.data[k].abs()).max(1e-3);
            assert!(err < 1e-5, "entry {k}: numeric {numeric}, analytic {}", analytic.data[k]);
        }
    }

    #[test]
    fn op_gradients_match_finite_differences() {
        let x0 = Matrix::from_rows(&[[0.3, -0.7, 1.1], [0.9, 0.2, -0.4]]);
        fd_check(
            |g, x| {
                let s = g.softmax_rows(x);
                let l = g.ln_clamped(s, 1e-12);
                let m = g.mul(l, s);
                g.sum(m)
            },
            x0.clone(),
        );
        fd_check(
            |g, x| {
                let n = g.normalize_rows(x);
                let t = g.transpose(n);
                let sim = g.matmul(n, t);
                let lse = g.logsumexp_masked(sim, vec![false, true, true, false]);
                g.sum(lse)
            },
            x0.clone(),
        );
        fd_check(
            |g, x| {
                let sq = g.mul(x, x);
                let cols = g.sum_rows(sq);
                let r = g.sqrt(cols);
                let rows = g.sum_cols(x);
                let e = g.exp(rows);
                let a = g.sum(r);
                let b = g.sum(e);
                g.add(a, b)
            },
            x0.clone(),
        );
        fd_check(
            |g, x| {
                let p = g.gather_rows(x, vec![1, 0, 1]);
                let c = g.concat_rows(vec![p, x]);
                let s = g.scale_rows(c, vec![1.0, 2.0, -1.0, 0.5, 3.0]);
                let bias = g.constant(Matrix::from_rows(&[[0.1, 0.25, 0.3]]));
                let b = g.add_row_vector(s, bias);
                let r = g.relu(b);
                let d = g.sub(r, b);
                let sc = g.scale(d, 1.5);
                let sq = g.mul(sc, sc);
                g.sum(sq)
            },
            x0,
        );
    }
}
