//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive as it is evaluated. Nodes are appended
//! in evaluation order, so the node list is already topologically sorted and
//! [`Tape::backward`] only has to walk it once from the output down to the
//! first leaf. Gradients are accumulated in that fixed order, which makes the
//! result bitwise reproducible for identical inputs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Dense;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `x · wᵀ + b` with `w` stored as (out × in) and `b` as (1 × out).
    Affine {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Offset(NodeId),
    Square(NodeId),
    Ln(NodeId),
    Clamp(NodeId, f64, f64),
    RowSum(NodeId),
    Sum(NodeId),
    RowSoftmax(NodeId),
    HConcat(Vec<NodeId>),
    GatherRows(NodeId, Vec<usize>),
    Min(NodeId, NodeId),
    Max(NodeId, NodeId),
    Cosine(NodeId, NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Dense,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, NodeId)>,
}

/// Gradients of a scalar output with respect to every node on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_node: Vec<Option<Dense>>,
    params: Vec<(String, NodeId, (usize, usize))>,
}

impl Gradients {
    /// Gradient with respect to `node`, or `None` when the output does not depend on it.
    pub fn wrt(&self, node: NodeId) -> Option<&Dense> {
        self.by_node.get(node.0).and_then(Option::as_ref)
    }

    /// Gradient of every registered parameter. Parameters the output never
    /// touched get an explicit zero matrix.
    pub fn params(&self) -> BTreeMap<String, Dense> {
        self.params
            .iter()
            .map(|(name, id, (r, c))| {
                let g = self.wrt(*id).cloned().unwrap_or_else(|| Dense::zeros(*r, *c));
                (name.clone(), g)
            })
            .collect()
    }
}

fn shape_err(op: &str, a: &Dense, b: &Dense) -> Error {
    Error::InvalidShape(format!(
        "{op}: incompatible shapes {}x{} and {}x{}",
        a.rows(),
        a.cols(),
        b.rows(),
        b.cols()
    ))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Dense {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        self.value(id).item()
    }

    fn push(&mut self, op: Op, value: Dense) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Records a named trainable leaf. Its gradient is reported by [`Gradients::params`].
    pub fn param(&mut self, name: impl Into<String>, value: &Dense) -> NodeId {
        let id = self.push(Op::Leaf, value.clone());
        self.params.push((name.into(), id));
        id
    }

    pub fn constant(&mut self, value: Dense) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols() != wv.cols() {
            return Err(shape_err("affine input", xv, wv));
        }
        if bv.shape() != (1, wv.rows()) {
            return Err(shape_err("affine bias", wv, bv));
        }
        let (n, inp, out) = (xv.rows(), wv.cols(), wv.rows());
        let mut y = Dense::zeros(n, out);
        for r in 0..n {
            let xr = xv.row(r);
            for o in 0..out {
                let wr = wv.row(o);
                let mut acc = bv.get(0, o);
                for i in 0..inp {
                    acc += xr[i] * wr[i];
                }
                y.set(r, o, acc);
            }
        }
        Ok(self.push(Op::Affine { x, w, b }, y))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), y))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).transpose();
        self.push(Op::Transpose(a), y)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), y)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), y)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), y)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), y))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), y))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), y))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let y = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), y)
    }

    pub fn offset(&mut self, a: NodeId, shift: f64) -> NodeId {
        let y = self.value(a).map(|x| x + shift);
        self.push(Op::Offset(a), y)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), y)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let y = self.value(a).map(f64::ln);
        self.push(Op::Ln(a), y)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero wherever the clamp is active.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let y = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), y)
    }

    /// Sum along each row: (n × m) → (n × 1).
    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut y = Dense::zeros(v.rows(), 1);
        for r in 0..v.rows() {
            y.set(r, 0, v.row(r).iter().sum());
        }
        self.push(Op::RowSum(a), y)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let y = Dense::scalar(self.value(a).sum());
        self.push(Op::Sum(a), y)
    }

    /// Softmax of each row, computed after subtracting the row maximum.
    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut y = Dense::zeros(v.rows(), v.cols());
        for r in 0..v.rows() {
            let row = v.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = y.row_mut(r);
            let mut total = 0.0;
            for (o, &x) in out.iter_mut().zip(row) {
                *o = (x - max).exp();
                total += *o;
            }
            for o in out.iter_mut() {
                *o /= total;
            }
        }
        self.push(Op::RowSoftmax(a), y)
    }

    /// Column-wise concatenation of matrices sharing a row count.
    pub fn hconcat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("hconcat of zero parts".into()));
        };
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(shape_err("hconcat", self.value(first), v));
            }
            cols += v.cols();
        }
        let mut y = Dense::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                y.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(Op::HConcat(parts.to_vec()), y))
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&mut self, a: NodeId, indices: &[usize]) -> Result<NodeId> {
        let v = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.rows()) {
            return Err(Error::Contract(format!(
                "row {bad} out of range for {} rows",
                v.rows()
            )));
        }
        let y = v.select_rows(indices);
        Ok(self.push(Op::GatherRows(a, indices.to_vec()), y))
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).zip_map(self.value(b), f64::min)?;
        Ok(self.push(Op::Min(a, b), y))
    }

    pub fn max(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.value(a).zip_map(self.value(b), f64::max)?;
        Ok(self.push(Op::Max(a, b), y))
    }

    /// Cosine similarity of two equally shaped matrices viewed as flat
    /// vectors. A zero-norm operand yields 0 with zero gradient.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        av.expect_same_shape(bv)?;
        let y = Dense::scalar(cosine_similarity(av.data(), bv.data()));
        Ok(self.push(Op::Cosine(a, b), y))
    }

    /// Reverse accumulation from a scalar `output`.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out_val = self.value(output);
        if out_val.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar output, found {}x{}",
                out_val.rows(),
                out_val.cols()
            )));
        }
        let mut grads: Vec<Option<Dense>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Dense::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .params
            .iter()
            .map(|(name, id)| (name.clone(), *id, self.value(*id).shape()))
            .collect();
        Ok(Gradients {
            by_node: grads,
            params,
        })
    }

    fn propagate(&self, op: &Op, y: &Dense, g: &Dense, grads: &mut [Option<Dense>]) {
        let mut acc = |id: NodeId, delta: Dense| match &mut grads[id.0] {
            Some(existing) => {
                for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *e += d;
                }
            }
            slot @ None => *slot = Some(delta),
        };

        match op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, inp, out) = (xv.rows(), wv.cols(), wv.rows());
                let mut dx = Dense::zeros(n, inp);
                let mut dw = Dense::zeros(out, inp);
                let mut db = Dense::zeros(1, out);
                for r in 0..n {
                    let xr = xv.row(r);
                    for o in 0..out {
                        let go = g.get(r, o);
                        if go == 0.0 {
                            continue;
                        }
                        db.data_mut()[o] += go;
                        let wr = wv.row(o);
                        let dxr = dx.row_mut(r);
                        for i in 0..inp {
                            dxr[i] += go * wr[i];
                        }
                        let dwr = dw.row_mut(o);
                        for i in 0..inp {
                            dwr[i] += go * xr[i];
                        }
                    }
                }
                acc(*x, dx);
                acc(*w, dw);
                acc(*b, db);
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = g.matmul(&bv.transpose()).expect("matmul grad shape");
                let db = av.transpose().matmul(g).expect("matmul grad shape");
                acc(*a, da);
                acc(*b, db);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Sigmoid(a) => acc(*a, zip(g, y, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => acc(*a, zip(g, y, |g, y| g * (1.0 - y * y))),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |g, x| if x > 0.0 { g } else { 0.0 }));
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
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, zip(g, bv, |g, b| g * b));
                acc(*b, zip(g, av, |g, a| g * a));
            }
            Op::Scale(a, f) => acc(*a, g.map(|v| v * f)),
            Op::Offset(a) => acc(*a, g.clone()),
            Op::Square(a) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |g, x| 2.0 * g * x));
            }
            Op::Ln(a) => {
                let x = self.value(*a);
                acc(*a, zip(g, x, |g, x| g / x));
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(*a);
                acc(
                    *a,
                    zip(g, x, |g, x| if x > *lo && x < *hi { g } else { 0.0 }),
                );
            }
            Op::RowSum(a) => {
                let x = self.value(*a);
                let mut d = Dense::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let gr = g.get(r, 0);
                    d.row_mut(r).iter_mut().for_each(|v| *v = gr);
                }
                acc(*a, d);
            }
            Op::Sum(a) => {
                let x = self.value(*a);
                acc(*a, Dense::filled(x.rows(), x.cols(), g.get(0, 0)));
            }
            Op::RowSoftmax(a) => {
                let mut d = Dense::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    for (dv, (&yv, &gv)) in d.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *dv = yv * (gv - dot);
                    }
                }
                acc(*a, d);
            }
            Op::HConcat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let width = self.value(p).cols();
                    let mut d = Dense::zeros(g.rows(), width);
                    for r in 0..g.rows() {
                        d.row_mut(r)
                            .copy_from_slice(&g.row(r)[offset..offset + width]);
                    }
                    offset += width;
                    acc(p, d);
                }
            }
            Op::GatherRows(a, indices) => {
                let x = self.value(*a);
                let mut d = Dense::zeros(x.rows(), x.cols());
                for (k, &src) in indices.iter().enumerate() {
                    for (dv, gv) in d.row_mut(src).iter_mut().zip(g.row(k)) {
                        *dv += gv;
                    }
                }
                acc(*a, d);
            }
            Op::Min(a, b) | Op::Max(a, b) => {
                let is_min = matches!(op, Op::Min(..));
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut da = Dense::zeros(av.rows(), av.cols());
                let mut db = Dense::zeros(bv.rows(), bv.cols());
                for k in 0..g.len() {
                    let (x, z, gv) = (av.data()[k], bv.data()[k], g.data()[k]);
                    // ties split the gradient evenly
                    let (wa, wb) = if x == z {
                        (0.5, 0.5)
                    } else if (x < z) == is_min {
                        (1.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    };
                    da.data_mut()[k] = wa * gv;
                    db.data_mut()[k] = wb * gv;
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::Cosine(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let na = norm(av.data());
                let nb = norm(bv.data());
                let gv = g.get(0, 0);
                if na == 0.0 || nb == 0.0 {
                    acc(*a, Dense::zeros(av.rows(), av.cols()));
                    acc(*b, Dense::zeros(bv.rows(), bv.cols()));
                } else {
                    let c = y.get(0, 0);
                    let inv = 1.0 / (na * nb);
                    let da = zip(av, bv, |x, z| gv * (z * inv - c * x / (na * na)));
                    let db = zip(bv, av, |z, x| gv * (x * inv - c * z / (nb * nb)));
                    acc(*a, da);
                    acc(*b, db);
                }
            }
        }
    }
}

fn zip(a: &Dense, b: &Dense, f: impl Fn(f64, f64) -> f64) -> Dense {
    a.zip_map(b, f).expect("gradient shapes agree with forward shapes")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `dot(a, b) / (|a| |b|)`, or 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_derivative() {
        let mut t = Tape::new();
        let x = t.param("x", &Dense::scalar(2.0));
        let g = t.backward(x).unwrap();
        assert_eq!(g.wrt(x).unwrap().item().unwrap(), 1.0);
    }

    #[test]
    fn tanh_at_zero() {
        let mut t = Tape::new();
        let x = t.param("x", &Dense::scalar(0.0));
        let y = t.tanh(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.params()["x"].item().unwrap(), 1.0);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.constant(Dense::zeros(2, 1));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let mut t = Tape::new();
        let x = t.constant(Dense::from_rows(&[vec![1.0, 2.0, -3.0], vec![700.0, 701.0, 699.0]]).unwrap());
        let shifted = t.offset(x, 12.5);
        let a = t.row_softmax(x);
        let b = t.row_softmax(shifted);
        for r in 0..2 {
            let s: f64 = t.value(a).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            for c in 0..3 {
                assert!((t.value(a).get(r, c) - t.value(b).get(r, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unreached_param_gets_zero_gradient() {
        let mut t = Tape::new();
        let x = t.param("x", &Dense::scalar(3.0));
        let _unused = t.param("w", &Dense::zeros(2, 3));
        let y = t.square(x);
        let g = t.backward(y).unwrap().params();
        assert_eq!(g["x"].item().unwrap(), 6.0);
        assert_eq!(g["w"], Dense::zeros(2, 3));
    }

    #[test]
    fn cosine_zero_norm_is_zero() {
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }
}
