//! Reverse-mode differentiation over a per-step tape.
//!
//! A [`Graph`] records every primitive application in insertion order; the
//! order is already topological, so `backward` is a single reverse sweep
//! that visits each node exactly once. One graph lives for one training
//! step and is dropped afterwards.

use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::{NodeRef, Tensor};
use crate::error::{Error, Result};

/// Epsilon inside the row-normalization square root; keeps zero rows finite.
pub const L2_NORM_EPS: f64 = 1e-12;

static GRAPH_IDS: AtomicU64 = AtomicU64::new(1);

/// Reduction target: the whole tensor or one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    All,
    Dim(usize),
}

#[derive(Debug, Clone, Copy)]
enum ReduceKind {
    Sum,
    Mean,
    Max,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Transpose { a: usize },
    SwapAxes { a: usize, ax0: usize, ax1: usize },
    Reshape { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Div { a: usize, b: usize },
    Exp { a: usize },
    Log { a: usize },
    Relu { a: usize },
    Scale { a: usize, c: f64 },
    Reduce { kind: ReduceKind, a: usize, axis: Axis },
    L2NormalizeRows { a: usize },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients keyed by node id, produced by [`Graph::backward`].
pub struct GradientMap {
    graph: u64,
    grads: Vec<Option<Tensor>>,
}

impl GradientMap {
    /// Gradient of the loss w.r.t. the node that produced `t`, if any.
    pub fn grad(&self, t: &Tensor) -> Option<&Tensor> {
        let node = t.node()?;
        if node.graph != self.graph {
            return None;
        }
        self.grads.get(node.index)?.as_ref()
    }
}

/// The recording tape.
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            id: GRAPH_IDS.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a tensor as a leaf of this graph, preserving its
    /// `requires_grad` flag. A tensor already belonging to this graph is
    /// returned unchanged; values from other graphs re-enter as fresh leaves.
    pub fn leaf(&mut self, t: &Tensor) -> Tensor {
        if let Some(node) = t.node() {
            if node.graph == self.id {
                return t.clone();
            }
        }
        self.push(Op::Leaf, t.detached(), t.requires_grad())
    }

    fn push(&mut self, op: Op, mut value: Tensor, requires_grad: bool) -> Tensor {
        let index = self.nodes.len();
        value.set_node(NodeRef {
            graph: self.id,
            index,
        });
        value.set_requires_grad(requires_grad);
        self.nodes.push(Node {
            op,
            value: value.clone(),
        });
        value
    }

    fn input(&mut self, t: &Tensor) -> usize {
        match t.node() {
            Some(node) if node.graph == self.id => node.index,
            _ => {
                let leaf = self.leaf(t);
                leaf.node().unwrap().index
            }
        }
    }

    fn needs(&self, idx: usize) -> bool {
        self.nodes[idx].value.requires_grad()
    }

    fn val(&self, idx: usize) -> &Tensor {
        &self.nodes[idx].value
    }

    // ── Primitive ops ───────────────────────────────────────────────────

    /// Matrix product of rank-2 tensors, m×k · k×p → m×p.
    pub fn matmul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let ai = self.input(a);
        let bi = self.input(b);
        let (av, bv) = (self.val(ai), self.val(bi));
        let (m, k, p) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let data = matmul_raw(av.data(), bv.data(), m, k, p);
        let out = Tensor::new(&[m, p], data)?;
        let needs = self.needs(ai) || self.needs(bi);
        Ok(self.push(Op::Matmul { a: ai, b: bi }, out, needs))
    }

    /// Rank-2 transpose.
    pub fn transpose(&mut self, a: &Tensor) -> Result<Tensor> {
        if a.rank() != 2 {
            return Err(Error::Contract(format!(
                "transpose expects rank 2, got shape {:?}",
                a.shape()
            )));
        }
        let ai = self.input(a);
        let av = self.val(ai);
        let (m, n) = (av.shape()[0], av.shape()[1]);
        let out = Tensor::new(&[n, m], transpose_raw(av.data(), m, n))?;
        let needs = self.needs(ai);
        Ok(self.push(Op::Transpose { a: ai }, out, needs))
    }

    /// Swap two axes of an arbitrary-rank tensor.
    pub fn swap_axes(&mut self, a: &Tensor, ax0: usize, ax1: usize) -> Result<Tensor> {
        let rank = a.rank();
        if ax0 >= rank || ax1 >= rank {
            return Err(Error::AxisOutOfRange {
                axis: ax0.max(ax1),
                rank,
            });
        }
        let ai = self.input(a);
        let av = self.val(ai);
        let (shape, data) = swap_axes_raw(av.shape(), av.data(), ax0, ax1);
        let out = Tensor::new(&shape, data)?;
        let needs = self.needs(ai);
        Ok(self.push(Op::SwapAxes { a: ai, ax0, ax1 }, out, needs))
    }

    /// Reinterpret the flat data under a new shape with equal element count.
    pub fn reshape(&mut self, a: &Tensor, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != a.len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: a.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let ai = self.input(a);
        let out = Tensor::new(shape, self.val(ai).data().to_vec())?;
        let needs = self.needs(ai);
        Ok(self.push(Op::Reshape { a: ai }, out, needs))
    }

    fn binary(
        &mut self,
        opname: &'static str,
        a: &Tensor,
        b: &Tensor,
        f: impl Fn(f64, f64) -> f64,
        mk: impl Fn(usize, usize) -> Op,
    ) -> Result<Tensor> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                op: opname,
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let ai = self.input(a);
        let bi = self.input(b);
        let (av, bv) = (self.val(ai), self.val(bi));
        let data: Vec<f64> = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(av.shape(), data)?;
        let needs = self.needs(ai) || self.needs(bi);
        Ok(self.push(mk(ai, bi), out, needs))
    }

    pub fn add(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("add", a, b, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn sub(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("sub", a, b, |x, y| x - y, |a, b| Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.binary("mul", a, b, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    /// Elementwise division; every divisor entry must be nonzero.
    pub fn div(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if let Some(i) = b.data().iter().position(|&y| y == 0.0) {
            return Err(Error::Domain {
                op: "div",
                index: i,
                detail: "division by zero".into(),
            });
        }
        self.binary("div", a, b, |x, y| x / y, |a, b| Op::Div { a, b })
    }

    fn unary(
        &mut self,
        a: &Tensor,
        f: impl Fn(f64) -> f64,
        mk: impl Fn(usize) -> Op,
    ) -> Result<Tensor> {
        let ai = self.input(a);
        let av = self.val(ai);
        let data: Vec<f64> = av.data().iter().map(|&x| f(x)).collect();
        let out = Tensor::new(av.shape(), data)?;
        let needs = self.needs(ai);
        Ok(self.push(mk(ai), out, needs))
    }

    pub fn exp(&mut self, a: &Tensor) -> Result<Tensor> {
        self.unary(a, f64::exp, |a| Op::Exp { a })
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(&mut self, a: &Tensor) -> Result<Tensor> {
        if let Some(i) = a.data().iter().position(|&x| x <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                index: i,
                detail: format!("log of non-positive value {}", a.data()[i]),
            });
        }
        self.unary(a, f64::ln, |a| Op::Log { a })
    }

    pub fn relu(&mut self, a: &Tensor) -> Result<Tensor> {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, |a| Op::Relu { a })
    }

    /// Multiply by a constant.
    pub fn scale(&mut self, a: &Tensor, c: f64) -> Result<Tensor> {
        if !c.is_finite() {
            return Err(Error::Contract(format!("scale by non-finite {c}")));
        }
        self.unary(a, |x| c * x, |a| Op::Scale { a, c })
    }

    fn reduce(&mut self, kind: ReduceKind, a: &Tensor, axis: Axis) -> Result<Tensor> {
        if let Axis::Dim(d) = axis {
            if d >= a.rank() {
                return Err(Error::AxisOutOfRange {
                    axis: d,
                    rank: a.rank(),
                });
            }
        }
        let ai = self.input(a);
        let av = self.val(ai);
        let (shape, data) = reduce_raw(kind, av.shape(), av.data(), axis);
        let out = Tensor::new(&shape, data)?;
        let needs = self.needs(ai);
        Ok(self.push(Op::Reduce { kind, a: ai, axis }, out, needs))
    }

    /// Sum over the whole tensor or one axis (axis removed from the shape).
    pub fn sum(&mut self, a: &Tensor, axis: Axis) -> Result<Tensor> {
        self.reduce(ReduceKind::Sum, a, axis)
    }

    pub fn mean(&mut self, a: &Tensor, axis: Axis) -> Result<Tensor> {
        self.reduce(ReduceKind::Mean, a, axis)
    }

    /// Max reduction; gradient flows to the lowest-index maximum on ties.
    pub fn max(&mut self, a: &Tensor, axis: Axis) -> Result<Tensor> {
        self.reduce(ReduceKind::Max, a, axis)
    }

    /// Divides each row of a rank-2 tensor by sqrt(sum of squares + eps).
    /// Zero rows stay (near) zero instead of erroring; the second return
    /// value counts them.
    pub fn l2_normalize_rows(&mut self, a: &Tensor) -> Result<(Tensor, usize)> {
        if a.rank() != 2 {
            return Err(Error::Contract(format!(
                "l2_normalize_rows expects rank 2, got shape {:?}",
                a.shape()
            )));
        }
        let ai = self.input(a);
        let av = self.val(ai);
        let (rows, cols) = (av.shape()[0], av.shape()[1]);
        let mut data = vec![0.0; rows * cols];
        let mut degenerate = 0usize;
        for r in 0..rows {
            let row = &av.data()[r * cols..(r + 1) * cols];
            let sumsq: f64 = row.iter().map(|x| x * x).sum();
            if sumsq == 0.0 {
                degenerate += 1;
            }
            let inv = 1.0 / (sumsq + L2_NORM_EPS).sqrt();
            for c in 0..cols {
                data[r * cols + c] = row[c] * inv;
            }
        }
        let out = Tensor::new(&[rows, cols], data)?;
        let needs = self.needs(ai);
        Ok((self.push(Op::L2NormalizeRows { a: ai }, out, needs), degenerate))
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Gradients of a scalar loss with respect to every `requires_grad`
    /// node. Unreached (but grad-requiring) leaves get zero gradients.
    pub fn backward(&self, loss: &Tensor) -> Result<GradientMap> {
        let node = loss.node().ok_or_else(|| {
            Error::Contract("backward: loss tensor is not part of any graph".into())
        })?;
        if node.graph != self.id {
            return Err(Error::Contract(
                "backward: loss tensor belongs to a different graph".into(),
            ));
        }
        if loss.len() != 1 {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                loss.shape()
            )));
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[node.index] = Some(vec![1.0]);

        for i in (0..=node.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }

        let mut out: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let t = match grads[i].take() {
                Some(raw) => Some(Tensor::new(n.value.shape(), raw)?),
                None if matches!(n.op, Op::Leaf) && n.value.requires_grad() => {
                    Some(Tensor::zeros(n.value.shape()))
                }
                None => None,
            };
            out.push(t);
        }
        Ok(GradientMap {
            graph: self.id,
            grads: out,
        })
    }

    fn propagate(
        &self,
        idx: usize,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) -> Result<()> {
        let acc = |grads: &mut [Option<Vec<f64>>], target: usize, contrib: Vec<f64>| {
            match &mut grads[target] {
                Some(existing) => {
                    for (e, c) in existing.iter_mut().zip(contrib) {
                        *e += c;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };

        match self.nodes[idx].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (av, bv) = (self.val(a), self.val(b));
                let (m, k, p) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.needs(a) {
                    // dA = dC · Bᵀ
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &g[i * p..(i + 1) * p];
                        let darow = &mut da[i * k..(i + 1) * k];
                        for (t, d) in darow.iter_mut().enumerate() {
                            let brow = &bv.data()[t * p..(t + 1) * p];
                            let mut s = 0.0;
                            for (gv, bvv) in grow.iter().zip(brow) {
                                s += gv * bvv;
                            }
                            *d = s;
                        }
                    }
                    acc(grads, a, da);
                }
                if self.needs(b) {
                    // dB = Aᵀ · dC
                    let mut db = vec![0.0; k * p];
                    for i in 0..m {
                        let arow = &av.data()[i * k..(i + 1) * k];
                        let grow = &g[i * p..(i + 1) * p];
                        for (t, &ait) in arow.iter().enumerate() {
                            if ait == 0.0 {
                                continue;
                            }
                            let dbrow = &mut db[t * p..(t + 1) * p];
                            for (d, gv) in dbrow.iter_mut().zip(grow) {
                                *d += ait * gv;
                            }
                        }
                    }
                    acc(grads, b, db);
                }
            }
            Op::Transpose { a } => {
                if self.needs(a) {
                    let av = self.val(a);
                    let (m, n) = (av.shape()[0], av.shape()[1]);
                    // output is n×m; transpose the incoming gradient back
                    acc(grads, a, transpose_raw(g, n, m));
                }
            }
            Op::SwapAxes { a, ax0, ax1 } => {
                if self.needs(a) {
                    let out_shape = self.nodes[idx].value.shape();
                    let (_, back) = swap_axes_raw(out_shape, g, ax0, ax1);
                    acc(grads, a, back);
                }
            }
            Op::Reshape { a } => {
                if self.needs(a) {
                    acc(grads, a, g.to_vec());
                }
            }
            Op::Add { a, b } => {
                if self.needs(a) {
                    acc(grads, a, g.to_vec());
                }
                if self.needs(b) {
                    acc(grads, b, g.to_vec());
                }
            }
            Op::Sub { a, b } => {
                if self.needs(a) {
                    acc(grads, a, g.to_vec());
                }
                if self.needs(b) {
                    acc(grads, b, g.iter().map(|x| -x).collect());
                }
            }
            Op::Mul { a, b } => {
                if self.needs(a) {
                    let c: Vec<f64> = g
                        .iter()
                        .zip(self.val(b).data())
                        .map(|(&gi, &bi)| gi * bi)
                        .collect();
                    acc(grads, a, c);
                }
                if self.needs(b) {
                    let c: Vec<f64> = g
                        .iter()
                        .zip(self.val(a).data())
                        .map(|(&gi, &ai)| gi * ai)
                        .collect();
                    acc(grads, b, c);
                }
            }
            Op::Div { a, b } => {
                if self.needs(a) {
                    let c: Vec<f64> = g
                        .iter()
                        .zip(self.val(b).data())
                        .map(|(&gi, &bi)| gi / bi)
                        .collect();
                    acc(grads, a, c);
                }
                if self.needs(b) {
                    let av = self.val(a);
                    let bv = self.val(b);
                    let c: Vec<f64> = g
                        .iter()
                        .zip(av.data().iter().zip(bv.data()))
                        .map(|(&gi, (&ai, &bi))| -gi * ai / (bi * bi))
                        .collect();
                    acc(grads, b, c);
                }
            }
            Op::Exp { a } => {
                if self.needs(a) {
                    let out = self.nodes[idx].value.data();
                    let c: Vec<f64> = g.iter().zip(out).map(|(&gi, &oi)| gi * oi).collect();
                    acc(grads, a, c);
                }
            }
            Op::Log { a } => {
                if self.needs(a) {
                    let c: Vec<f64> = g
                        .iter()
                        .zip(self.val(a).data())
                        .map(|(&gi, &ai)| gi / ai)
                        .collect();
                    acc(grads, a, c);
                }
            }
            Op::Relu { a } => {
                if self.needs(a) {
                    // subgradient 0 at exactly 0
                    let c: Vec<f64> = g
                        .iter()
                        .zip(self.val(a).data())
                        .map(|(&gi, &ai)| if ai > 0.0 { gi } else { 0.0 })
                        .collect();
                    acc(grads, a, c);
                }
            }
            Op::Scale { a, c } => {
                if self.needs(a) {
                    acc(grads, a, g.iter().map(|&gi| c * gi).collect());
                }
            }
            Op::Reduce { kind, a, axis } => {
                if self.needs(a) {
                    let av = self.val(a);
                    acc(grads, a, reduce_backward(kind, av.shape(), av.data(), axis, g));
                }
            }
            Op::L2NormalizeRows { a } => {
                if self.needs(a) {
                    let av = self.val(a);
                    let (rows, cols) = (av.shape()[0], av.shape()[1]);
                    let mut da = vec![0.0; rows * cols];
                    for r in 0..rows {
                        let row = &av.data()[r * cols..(r + 1) * cols];
                        let grow = &g[r * cols..(r + 1) * cols];
                        let sumsq: f64 = row.iter().map(|x| x * x).sum();
                        let norm = (sumsq + L2_NORM_EPS).sqrt();
                        let dot: f64 = grow.iter().zip(row).map(|(&gi, &xi)| gi * xi).sum();
                        let inv = 1.0 / norm;
                        let inv3 = inv / (norm * norm);
                        for c in 0..cols {
                            da[r * cols + c] = grow[c] * inv - row[c] * dot * inv3;
                        }
                    }
                    acc(grads, a, da);
                }
            }
        }
        Ok(())
    }
}

// ── Raw kernels shared by forward and backward ─────────────────────────

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * p];
    for i in 0..m {
        for t in 0..k {
            let ait = a[i * k + t];
            if ait == 0.0 {
                continue;
            }
            let brow = &b[t * p..(t + 1) * p];
            let crow = &mut c[i * p..(i + 1) * p];
            for j in 0..p {
                crow[j] += ait * brow[j];
            }
        }
    }
    c
}

fn transpose_raw(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

fn swap_axes_raw(shape: &[usize], data: &[f64], ax0: usize, ax1: usize) -> (Vec<usize>, Vec<f64>) {
    let mut out_shape = shape.to_vec();
    out_shape.swap(ax0, ax1);
    if ax0 == ax1 {
        return (out_shape, data.to_vec());
    }
    let in_strides = strides_of(shape);
    let out_strides = strides_of(&out_shape);
    let mut out = vec![0.0; data.len()];
    let rank = shape.len();
    let mut coords = vec![0usize; rank];
    for (flat, &v) in data.iter().enumerate() {
        let mut rem = flat;
        for d in 0..rank {
            coords[d] = rem / in_strides[d];
            rem %= in_strides[d];
        }
        coords.swap(ax0, ax1);
        let mut o = 0;
        for d in 0..rank {
            o += coords[d] * out_strides[d];
        }
        out[o] = v;
    }
    (out_shape, out)
}

/// Decomposes a shape around `axis` into (outer, axis extent, inner) runs.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn reduce_raw(kind: ReduceKind, shape: &[usize], data: &[f64], axis: Axis) -> (Vec<usize>, Vec<f64>) {
    match axis {
        Axis::All => {
            let v = match kind {
                ReduceKind::Sum => data.iter().sum(),
                ReduceKind::Mean => data.iter().sum::<f64>() / data.len() as f64,
                ReduceKind::Max => data.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (vec![], vec![v])
        }
        Axis::Dim(d) => {
            let (outer, len, inner) = axis_split(shape, d);
            let mut out_shape = shape.to_vec();
            out_shape.remove(d);
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for i in 0..inner {
                    let mut accum = match kind {
                        ReduceKind::Max => f64::NEG_INFINITY,
                        _ => 0.0,
                    };
                    for a in 0..len {
                        let v = data[(o * len + a) * inner + i];
                        accum = match kind {
                            ReduceKind::Max => accum.max(v),
                            _ => accum + v,
                        };
                    }
                    if let ReduceKind::Mean = kind {
                        accum /= len as f64;
                    }
                    out[o * inner + i] = accum;
                }
            }
            (out_shape, out)
        }
    }
}

fn reduce_backward(
    kind: ReduceKind,
    shape: &[usize],
    input: &[f64],
    axis: Axis,
    g: &[f64],
) -> Vec<f64> {
    match axis {
        Axis::All => {
            let g0 = g[0];
            match kind {
                ReduceKind::Sum => vec![g0; input.len()],
                ReduceKind::Mean => vec![g0 / input.len() as f64; input.len()],
                ReduceKind::Max => {
                    // lowest flat index wins ties
                    let mut best = 0usize;
                    for (i, &v) in input.iter().enumerate() {
                        if v > input[best] {
                            best = i;
                        }
                    }
                    let mut out = vec![0.0; input.len()];
                    out[best] = g0;
                    out
                }
            }
        }
        Axis::Dim(d) => {
            let (outer, len, inner) = axis_split(shape, d);
            let mut out = vec![0.0; input.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let gv = g[o * inner + i];
                    match kind {
                        ReduceKind::Sum => {
                            for a in 0..len {
                                out[(o * len + a) * inner + i] = gv;
                            }
                        }
                        ReduceKind::Mean => {
                            let s = gv / len as f64;
                            for a in 0..len {
                                out[(o * len + a) * inner + i] = s;
                            }
                        }
                        ReduceKind::Max => {
                            let mut best = 0usize;
                            let mut best_v = input[(o * len) * inner + i];
                            for a in 1..len {
                                let v = input[(o * len + a) * inner + i];
                                if v > best_v {
                                    best_v = v;
                                    best = a;
                                }
                            }
                            out[(o * len + best) * inner + i] = gv;
                        }
                    }
                }
            }
            out
        }
    }
}
