//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only record of forward ops. Node ids are indices
//! into the record, inputs always precede outputs, and [`Graph::backward`]
//! walks the record once in reverse, so gradients are exact for the op set
//! and deterministic for a fixed op sequence.

use super::matmul::{matmul_nn, matmul_nt, matmul_tn};
use super::params::{ParamId, Params};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf(Option<ParamId>),
    MatMul(NodeId, NodeId),
    /// `a * b^T`, used for shared query banks.
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// Matrix plus broadcast row vector (bias).
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Minimum(NodeId, NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Log(NodeId),
    /// Row-wise softmax over the last dimension.
    Softmax(NodeId),
    Scale(NodeId, f64),
    Offset(NodeId, f64),
    Clamp(NodeId, f64, f64),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    Sum(NodeId),
    Mean(NodeId),
    /// Sum over the last dimension, one value per row.
    RowSum(NodeId),
    /// Each input row repeated `rep` times consecutively.
    RepeatRows(NodeId, usize),
    /// Consecutive groups of `group` rows summed into one row.
    SumRowGroups(NodeId, usize),
    Reshape(NodeId),
    /// Blocks of `r x c` rows transposed in place: `(g*r) x c -> (g*c) x r`.
    GroupTranspose(NodeId, usize, usize),
    /// Per-sample weighted sum over a set. Weights `(B*m) x n`, values
    /// `(B*n) x d`, output `B x (m*d)`.
    SetWeightedSum {
        weights: NodeId,
        values: NodeId,
        queries: usize,
        set: usize,
    },
    /// Rows of `a` scaled by the column vector `s`.
    ScaleRows(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Forward tape plus parameter-leaf memoization.
pub struct Graph {
    nodes: Vec<Node>,
    param_leaf: Vec<Option<NodeId>>,
}

fn shape_err(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: lhs.shape(),
        rhs: rhs.shape(),
    }
}

impl Graph {
    pub fn new(num_params: usize) -> Self {
        Graph {
            nodes: Vec::new(),
            param_leaf: vec![None; num_params],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    /// Leaf holding a copy of parameter `id`; one leaf per parameter per graph.
    pub fn param(&mut self, params: &Params, id: ParamId) -> NodeId {
        if let Some(node) = self.param_leaf[id] {
            return node;
        }
        let node = self.push(Op::Leaf(Some(id)), params.get(id).clone());
        self.param_leaf[id] = Some(node);
        node
    }

    /// Leaf with no gradient flow.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf(None), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.cols() != vb.rows() {
            return Err(shape_err("matmul", va, vb));
        }
        let value = matmul_nn(va, vb);
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.cols() != vb.cols() {
            return Err(shape_err("matmul_nt", va, vb));
        }
        let value = matmul_nt(va, vb);
        Ok(self.push(Op::MatMulNT(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("add", va, vb));
        }
        let mut value = va.clone();
        value.add_in_place(vb);
        Ok(self.push(Op::Add(a, b), value))
    }

    /// `a + b` with `b` a `1 x n` row vector broadcast over rows of `a`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if vb.rows() != 1 || va.cols() != vb.cols() {
            return Err(shape_err("add_row", va, vb));
        }
        let mut value = va.clone();
        let cols = value.cols();
        for r in 0..value.rows() {
            for c in 0..cols {
                let v = value.get(r, c) + vb.get(0, c);
                value.set(r, c, v);
            }
        }
        Ok(self.push(Op::AddRow(a, b), value))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("sub", va, vb));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x - y)
            .collect();
        let value = Tensor::new(va.rows(), va.cols(), data);
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("mul", va, vb));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(va.rows(), va.cols(), data);
        Ok(self.push(Op::Mul(a, b), value))
    }

    /// Elementwise minimum; on ties the gradient routes to the first input.
    pub fn minimum(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("minimum", va, vb));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x.min(*y))
            .collect();
        let value = Tensor::new(va.rows(), va.cols(), data);
        Ok(self.push(Op::Minimum(a, b), value))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.map(|v| v.max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.map(f64::ln);
        self.push(Op::Log(a), value)
    }

    /// Numerically stable row-wise softmax.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let (rows, cols) = va.shape();
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = va.row_slice(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for c in 0..cols {
                let e = (row[c] - max).exp();
                value.set(r, c, e);
                denom += e;
            }
            for c in 0..cols {
                let v = value.get(r, c) / denom;
                value.set(r, c, v);
            }
        }
        self.push(Op::Softmax(a), value)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a].value.map(|v| v * c);
        self.push(Op::Scale(a, c), value)
    }

    pub fn offset(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a].value.map(|v| v + c);
        self.push(Op::Offset(a, c), value)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let value = self.nodes[a].value.map(|v| v.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), value)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0]].value.rows();
        let mut cols = 0;
        for &p in parts {
            let v = &self.nodes[p].value;
            if v.rows() != rows {
                return Err(shape_err("concat", &self.nodes[parts[0]].value, v));
            }
            cols += v.cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = &self.nodes[p].value;
            for r in 0..rows {
                for c in 0..v.cols() {
                    value.set(r, offset + c, v.get(r, c));
                }
            }
            offset += v.cols();
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if end > va.cols() || start >= end {
            return Err(Error::InvalidArgument(format!(
                "slice {}..{} out of bounds for {} columns",
                start,
                end,
                va.cols()
            )));
        }
        let mut value = Tensor::zeros(va.rows(), end - start);
        for r in 0..va.rows() {
            for c in start..end {
                value.set(r, c - start, va.get(r, c));
            }
        }
        Ok(self.push(Op::SliceCols(a, start, end), value))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.nodes[a].value.data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(total))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a].value;
        let total: f64 = v.data().iter().sum();
        let value = Tensor::scalar(total / v.len() as f64);
        self.push(Op::Mean(a), value)
    }

    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a].value;
        let mut value = Tensor::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            value.set(r, 0, va.row_slice(r).iter().sum());
        }
        self.push(Op::RowSum(a), value)
    }

    pub fn repeat_rows(&mut self, a: NodeId, rep: usize) -> NodeId {
        let va = &self.nodes[a].value;
        let (rows, cols) = va.shape();
        let mut data = Vec::with_capacity(rows * rep * cols);
        for r in 0..rows {
            for _ in 0..rep {
                data.extend_from_slice(va.row_slice(r));
            }
        }
        let value = Tensor::new(rows * rep, cols, data);
        self.push(Op::RepeatRows(a, rep), value)
    }

    pub fn sum_row_groups(&mut self, a: NodeId, group: usize) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if group == 0 || va.rows() % group != 0 {
            return Err(Error::InvalidArgument(format!(
                "sum_row_groups: {} rows not divisible by group {}",
                va.rows(),
                group
            )));
        }
        let out_rows = va.rows() / group;
        let cols = va.cols();
        let mut value = Tensor::zeros(out_rows, cols);
        for r in 0..va.rows() {
            let o = r / group;
            for c in 0..cols {
                let v = value.get(o, c) + va.get(r, c);
                value.set(o, c, v);
            }
        }
        Ok(self.push(Op::SumRowGroups(a, group), value))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let value = self.nodes[a].value.reshaped(rows, cols)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    pub fn group_transpose(&mut self, a: NodeId, r: usize, c: usize) -> Result<NodeId> {
        let va = &self.nodes[a].value;
        if va.cols() != c || va.rows() % r != 0 {
            return Err(Error::InvalidArgument(format!(
                "group_transpose: shape {:?} incompatible with blocks {}x{}",
                va.shape(),
                r,
                c
            )));
        }
        let groups = va.rows() / r;
        let mut value = Tensor::zeros(groups * c, r);
        for g in 0..groups {
            for i in 0..r {
                for j in 0..c {
                    value.set(g * c + j, i, va.get(g * r + i, j));
                }
            }
        }
        Ok(self.push(Op::GroupTranspose(a, r, c), value))
    }

    /// `out[b, q*d + j] = sum_s weights[b*m + q, s] * values[b*n + s, j]`.
    pub fn set_weighted_sum(
        &mut self,
        weights: NodeId,
        values: NodeId,
        queries: usize,
        set: usize,
    ) -> Result<NodeId> {
        let (w, v) = (&self.nodes[weights].value, &self.nodes[values].value);
        if queries == 0
            || set == 0
            || w.rows() % queries != 0
            || w.cols() != set
            || v.rows() != (w.rows() / queries) * set
        {
            return Err(shape_err("set_weighted_sum", w, v));
        }
        let batch = w.rows() / queries;
        let d = v.cols();
        let mut value = Tensor::zeros(batch, queries * d);
        for b in 0..batch {
            for q in 0..queries {
                for s in 0..set {
                    let weight = w.get(b * queries + q, s);
                    if weight == 0.0 {
                        continue;
                    }
                    let vrow = v.row_slice(b * set + s);
                    let orow = &mut value.data_mut()[b * queries * d + q * d..];
                    for (j, vv) in vrow.iter().enumerate() {
                        orow[j] += weight * vv;
                    }
                }
            }
        }
        Ok(self.push(
            Op::SetWeightedSum {
                weights,
                values,
                queries,
                set,
            },
            value,
        ))
    }

    /// Row `r` of `a` scaled by `s[r]`, `s` an `m x 1` column.
    pub fn scale_rows(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (va, vs) = (&self.nodes[a].value, &self.nodes[s].value);
        if vs.cols() != 1 || vs.rows() != va.rows() {
            return Err(shape_err("scale_rows", va, vs));
        }
        let mut value = va.clone();
        let cols = value.cols();
        for r in 0..value.rows() {
            let f = vs.get(r, 0);
            for c in 0..cols {
                let v = value.get(r, c) * f;
                value.set(r, c, v);
            }
        }
        Ok(self.push(Op::ScaleRows(a, s), value))
    }

    /// Reverse pass from a scalar loss. Returns one gradient slot per node;
    /// parameters the loss does not depend on get `None` (read as zeros).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = &self.nodes[loss].value;
        if lv.shape() != (1, 1) {
            return Err(Error::NonScalarLoss(lv.rows(), lv.cols()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Tensor::scalar(1.0));

        for id in (0..=loss).rev() {
            let Some(dy) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &dy, &mut grads);
            grads[id] = Some(dy);
        }

        Ok(Gradients {
            by_node: grads,
            param_leaf: self.param_leaf.clone(),
        })
    }

    fn propagate(&self, id: NodeId, dy: &Tensor, grads: &mut [Option<Tensor>]) {
        fn accum(grads: &mut [Option<Tensor>], id: NodeId, t: Tensor) {
            match &mut grads[id] {
                Some(g) => g.add_in_place(&t),
                slot @ None => *slot = Some(t),
            }
        }

        match &self.nodes[id].op {
            Op::Leaf(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                accum(grads, *a, matmul_nt(dy, vb));
                accum(grads, *b, matmul_tn(va, dy));
            }
            Op::MatMulNT(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                accum(grads, *a, matmul_nn(dy, vb));
                accum(grads, *b, matmul_tn(dy, va));
            }
            Op::Add(a, b) => {
                accum(grads, *a, dy.clone());
                accum(grads, *b, dy.clone());
            }
            Op::AddRow(a, b) => {
                accum(grads, *a, dy.clone());
                let mut db = Tensor::zeros(1, dy.cols());
                for r in 0..dy.rows() {
                    for c in 0..dy.cols() {
                        let v = db.get(0, c) + dy.get(r, c);
                        db.set(0, c, v);
                    }
                }
                accum(grads, *b, db);
            }
            Op::Sub(a, b) => {
                accum(grads, *a, dy.clone());
                accum(grads, *b, dy.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let da: Vec<f64> = dy.data().iter().zip(vb.data()).map(|(d, y)| d * y).collect();
                let db: Vec<f64> = dy.data().iter().zip(va.data()).map(|(d, x)| d * x).collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
                accum(grads, *b, Tensor::new(dy.rows(), dy.cols(), db));
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let da: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(va.data().iter().zip(vb.data()))
                    .map(|(d, (x, y))| if x <= y { *d } else { 0.0 })
                    .collect();
                let db: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(va.data().iter().zip(vb.data()))
                    .map(|(d, (x, y))| if x > y { *d } else { 0.0 })
                    .collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
                accum(grads, *b, Tensor::new(dy.rows(), dy.cols(), db));
            }
            Op::Relu(a) => {
                let va = &self.nodes[*a].value;
                let da: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(d, x)| if *x > 0.0 { *d } else { 0.0 })
                    .collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
            }
            Op::Tanh(a) => {
                let y = &self.nodes[id].value;
                let da: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(d, t)| d * (1.0 - t * t))
                    .collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
            }
            Op::Exp(a) => {
                let y = &self.nodes[id].value;
                let da: Vec<f64> = dy.data().iter().zip(y.data()).map(|(d, e)| d * e).collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
            }
            Op::Log(a) => {
                let va = &self.nodes[*a].value;
                let da: Vec<f64> = dy.data().iter().zip(va.data()).map(|(d, x)| d / x).collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
            }
            Op::Softmax(a) => {
                let y = &self.nodes[id].value;
                let (rows, cols) = y.shape();
                let mut da = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let yr = y.row_slice(r);
                    let dr = dy.row_slice(r);
                    let dot: f64 = yr.iter().zip(dr).map(|(yv, dv)| yv * dv).sum();
                    for c in 0..cols {
                        da.set(r, c, yr[c] * (dr[c] - dot));
                    }
                }
                accum(grads, *a, da);
            }
            Op::Scale(a, c) => {
                accum(grads, *a, dy.map(|v| v * c));
            }
            Op::Offset(a, _) => {
                accum(grads, *a, dy.clone());
            }
            Op::Clamp(a, lo, hi) => {
                let va = &self.nodes[*a].value;
                let da: Vec<f64> = dy
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(d, x)| if *x >= *lo && *x <= *hi { *d } else { 0.0 })
                    .collect();
                accum(grads, *a, Tensor::new(dy.rows(), dy.cols(), da));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.nodes[p].value.cols();
                    let mut dp = Tensor::zeros(dy.rows(), pc);
                    for r in 0..dy.rows() {
                        for c in 0..pc {
                            dp.set(r, c, dy.get(r, offset + c));
                        }
                    }
                    accum(grads, p, dp);
                    offset += pc;
                }
            }
            Op::SliceCols(a, start, _end) => {
                let va = &self.nodes[*a].value;
                let mut da = Tensor::zeros(va.rows(), va.cols());
                for r in 0..dy.rows() {
                    for c in 0..dy.cols() {
                        da.set(r, start + c, dy.get(r, c));
                    }
                }
                accum(grads, *a, da);
            }
            Op::Sum(a) => {
                let va = &self.nodes[*a].value;
                accum(grads, *a, Tensor::full(va.rows(), va.cols(), dy.item()));
            }
            Op::Mean(a) => {
                let va = &self.nodes[*a].value;
                let g = dy.item() / va.len() as f64;
                accum(grads, *a, Tensor::full(va.rows(), va.cols(), g));
            }
            Op::RowSum(a) => {
                let va = &self.nodes[*a].value;
                let mut da = Tensor::zeros(va.rows(), va.cols());
                for r in 0..va.rows() {
                    let d = dy.get(r, 0);
                    for c in 0..va.cols() {
                        da.set(r, c, d);
                    }
                }
                accum(grads, *a, da);
            }
            Op::RepeatRows(a, rep) => {
                let va = &self.nodes[*a].value;
                let mut da = Tensor::zeros(va.rows(), va.cols());
                for r in 0..dy.rows() {
                    let src = r / rep;
                    for c in 0..dy.cols() {
                        let v = da.get(src, c) + dy.get(r, c);
                        da.set(src, c, v);
                    }
                }
                accum(grads, *a, da);
            }
            Op::SumRowGroups(a, group) => {
                let va = &self.nodes[*a].value;
                let mut da = Tensor::zeros(va.rows(), va.cols());
                for r in 0..va.rows() {
                    let src = r / group;
                    for c in 0..va.cols() {
                        da.set(r, c, dy.get(src, c));
                    }
                }
                accum(grads, *a, da);
            }
            Op::Reshape(a) => {
                let va = &self.nodes[*a].value;
                let da = Tensor::new(va.rows(), va.cols(), dy.data().to_vec());
                accum(grads, *a, da);
            }
            Op::GroupTranspose(a, r, c) => {
                let va = &self.nodes[*a].value;
                let groups = va.rows() / r;
                let mut da = Tensor::zeros(va.rows(), va.cols());
                for g in 0..groups {
                    for i in 0..*r {
                        for j in 0..*c {
                            da.set(g * r + i, j, dy.get(g * c + j, i));
                        }
                    }
                }
                accum(grads, *a, da);
            }
            Op::SetWeightedSum {
                weights,
                values,
                queries,
                set,
            } => {
                let (w, v) = (&self.nodes[*weights].value, &self.nodes[*values].value);
                let batch = w.rows() / queries;
                let d = v.cols();
                let mut dw = Tensor::zeros(w.rows(), w.cols());
                let mut dv = Tensor::zeros(v.rows(), v.cols());
                for b in 0..batch {
                    for q in 0..*queries {
                        let drow = &dy.row_slice(b)[q * d..(q + 1) * d];
                        for s in 0..*set {
                            let vrow = v.row_slice(b * set + s);
                            let mut acc = 0.0;
                            for j in 0..d {
                                acc += drow[j] * vrow[j];
                            }
                            dw.set(b * queries + q, s, dw.get(b * queries + q, s) + acc);
                            let weight = w.get(b * queries + q, s);
                            if weight != 0.0 {
                                let dvrow =
                                    &mut dv.data_mut()[(b * set + s) * d..(b * set + s + 1) * d];
                                for j in 0..d {
                                    dvrow[j] += weight * drow[j];
                                }
                            }
                        }
                    }
                }
                accum(grads, *weights, dw);
                accum(grads, *values, dv);
            }
            Op::ScaleRows(a, s) => {
                let (va, vs) = (&self.nodes[*a].value, &self.nodes[*s].value);
                let mut da = Tensor::zeros(va.rows(), va.cols());
                let mut ds = Tensor::zeros(vs.rows(), 1);
                for r in 0..va.rows() {
                    let f = vs.get(r, 0);
                    let mut acc = 0.0;
                    for c in 0..va.cols() {
                        da.set(r, c, dy.get(r, c) * f);
                        acc += dy.get(r, c) * va.get(r, c);
                    }
                    ds.set(r, 0, acc);
                }
                accum(grads, *a, da);
                accum(grads, *s, ds);
            }
        }
    }
}

/// Output of [`Graph::backward`].
pub struct Gradients {
    by_node: Vec<Option<Tensor>>,
    param_leaf: Vec<Option<NodeId>>,
}

impl Gradients {
    pub fn node(&self, id: NodeId) -> Option<&Tensor> {
        self.by_node[id].as_ref()
    }

    /// Gradient for a parameter; zeros when the loss does not touch it.
    pub fn for_param(&self, params: &Params, id: ParamId) -> Tensor {
        match self.param_leaf[id].and_then(|n| self.by_node[n].clone()) {
            Some(g) => g,
            None => {
                let p = params.get(id);
                Tensor::zeros(p.rows(), p.cols())
            }
        }
    }
}
