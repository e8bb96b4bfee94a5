//! Define-by-run computational graph over dense matrices.
//!
//! Nodes are appended in construction order, which is also a valid
//! topological order: a node's parents always precede it. Values are
//! computed lazily by [`Graph::forward`] so that named inputs (model
//! parameters) can be bound from a [`ParamSet`] at evaluation time.

use std::collections::BTreeMap;

use super::matrix::Matrix;
use super::params::ParamSet;
use crate::error::{Error, Result};

/// Rows with Euclidean norm below this are treated as degenerate by
/// row normalization.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input(String),
    Constant,
    MatMul,
    Transpose,
    /// Elementwise sum; the right operand may be a `1×n` row broadcast
    /// over every row of the left operand.
    Add,
    /// Elementwise difference, same broadcasting as [`Op::Add`].
    Sub,
    Mul,
    Scale(f64),
    Relu,
    Sigmoid,
    L2NormRows,
    /// Row-major reshape to `1×n`.
    Flatten,
    /// Row-major reshape to `n/cols × cols`.
    Reshape { cols: usize },
    /// Column-wise concatenation of all parents (equal row counts).
    Concat,
    Mean,
    Sum,
    Square,
    Sqrt,
    /// For a `(B·block)×d` input, row `b` of the `B×block²` output holds the
    /// row-major Gram matrix of rows `b·block .. (b+1)·block`.
    BlockGram { block: usize },
    /// Mean binary cross-entropy between `sigmoid(logits)` and targets.
    BceWithLogits,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Constant => "constant",
            Op::MatMul => "matmul",
            Op::Transpose => "transpose",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::L2NormRows => "l2norm_rows",
            Op::Flatten => "flatten",
            Op::Reshape { .. } => "reshape",
            Op::Concat => "concat",
            Op::Mean => "mean",
            Op::Sum => "sum",
            Op::Square => "square",
            Op::Sqrt => "sqrt",
            Op::BlockGram { .. } => "block_gram",
            Op::BceWithLogits => "bce_with_logits",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    parents: Vec<NodeId>,
    value: Option<Matrix>,
    grad: Option<Matrix>,
}

/// Gradients of a scalar root with respect to every named input it
/// depends on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    by_name: BTreeMap<String, Matrix>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

/// Diagnostics gathered during the most recent forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardStats {
    /// Rows zeroed by `l2norm_rows` because their norm fell below [`NORM_FLOOR`].
    pub degenerate_rows: usize,
    /// Smallest `|x|` seen at any ReLU input; `+inf` when the graph has none.
    pub relu_margin: f64,
}

impl Default for ForwardStats {
    fn default() -> Self {
        Self {
            degenerate_rows: 0,
            relu_margin: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    stats: ForwardStats,
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

    fn push(&mut self, op: Op, parents: Vec<NodeId>, value: Option<Matrix>) -> NodeId {
        debug_assert!(parents.iter().all(|p| p.0 < self.nodes.len()));
        self.nodes.push(Node {
            op,
            parents,
            value,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Named leaf bound at forward time.
    pub fn input(&mut self, name: impl Into<String>) -> NodeId {
        self.push(Op::Input(name.into()), vec![], None)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Constant, vec![], Some(value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::MatMul, vec![a, b], None)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Transpose, vec![a], None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add, vec![a, b], None)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub, vec![a, b], None)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul, vec![a, b], None)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        self.push(Op::Scale(factor), vec![a], None)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Relu, vec![a], None)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sigmoid, vec![a], None)
    }

    pub fn l2norm_rows(&mut self, a: NodeId) -> NodeId {
        self.push(Op::L2NormRows, vec![a], None)
    }

    pub fn flatten(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Flatten, vec![a], None)
    }

    pub fn reshape(&mut self, a: NodeId, cols: usize) -> NodeId {
        self.push(Op::Reshape { cols }, vec![a], None)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        self.push(Op::Concat, parts.to_vec(), None)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Mean, vec![a], None)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum, vec![a], None)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Square, vec![a], None)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sqrt, vec![a], None)
    }

    pub fn block_gram(&mut self, a: NodeId, block: usize) -> NodeId {
        self.push(Op::BlockGram { block }, vec![a], None)
    }

    pub fn bce_with_logits(&mut self, logits: NodeId, targets: NodeId) -> NodeId {
        self.push(Op::BceWithLogits, vec![logits, targets], None)
    }

    /// Affine layer `x·W + b` with `W`, `b` bound by name.
    pub fn dense(&mut self, x: NodeId, weight: &str, bias: &str) -> NodeId {
        let w = self.input(weight);
        let b = self.input(bias);
        let xw = self.matmul(x, w);
        self.add(xw, b)
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    pub fn value(&self, id: NodeId) -> Option<&Matrix> {
        self.nodes.get(id.0).and_then(|n| n.value.as_ref())
    }

    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.nodes.get(id.0).and_then(|n| n.grad.as_ref())
    }

    pub fn stats(&self) -> ForwardStats {
        self.stats
    }

    /// Evaluates every node up to and including `root`.
    pub fn forward(&mut self, root: NodeId, bindings: &ParamSet) -> Result<&Matrix> {
        if root.0 >= self.nodes.len() {
            return Err(Error::contract(format!("node {} does not exist", root.0)));
        }
        let mut stats = ForwardStats::default();
        for i in 0..=root.0 {
            let value = match &self.nodes[i].op {
                Op::Constant => continue,
                Op::Input(name) => bindings
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::MissingBinding(name.clone()))?,
                op => {
                    let parents: Vec<&Matrix> = self.nodes[i]
                        .parents
                        .iter()
                        .map(|p| {
                            self.nodes[p.0]
                                .value
                                .as_ref()
                                .expect("parents evaluated before children")
                        })
                        .collect();
                    eval(op, &parents, &mut stats)?
                }
            };
            self.nodes[i].value = Some(value);
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.stats = stats;
        Ok(self.nodes[root.0].value.as_ref().unwrap())
    }

    /// Reverse pass from a scalar `root`. Gradients for a name bound by
    /// several input nodes are summed.
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients> {
        let root_value = self
            .value(root)
            .ok_or_else(|| Error::contract("backward called before forward"))?;
        if root_value.shape() != (1, 1) {
            return Err(Error::contract(format!(
                "backward root must be 1x1, got {}x{}",
                root_value.rows(),
                root_value.cols()
            )));
        }

        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let parents: Vec<&Matrix> = node
                .parents
                .iter()
                .map(|p| self.nodes[p.0].value.as_ref().unwrap())
                .collect();
            let value = node.value.as_ref().unwrap();
            let parent_grads = local_grads(&node.op, &parents, value, &g);
            for (p, pg) in node.parents.iter().zip(parent_grads) {
                match &mut grads[p.0] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
            self.nodes[i].grad = Some(g);
        }

        let mut out = Gradients::default();
        for node in &self.nodes[..=root.0] {
            if let (Op::Input(name), Some(g)) = (&node.op, &node.grad) {
                match out.by_name.get_mut(name) {
                    Some(acc) => acc.add_assign(g),
                    None => {
                        out.by_name.insert(name.clone(), g.clone());
                    }
                }
            }
        }
        Ok(out)
    }
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
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Rows scaled to unit Euclidean norm, plus the indices of rows that were
/// below [`NORM_FLOOR`] and were set to zero instead.
pub fn l2_normalize_rows(x: &Matrix) -> (Matrix, Vec<usize>) {
    let mut out = x.clone();
    let mut degenerate = Vec::new();
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < NORM_FLOOR {
            row.fill(0.0);
            degenerate.push(r);
        } else {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    (out, degenerate)
}

/// Per-block Gram matrices; entries `(i, j)` and `(j, i)` are the same
/// floating-point value.
pub(crate) fn block_gram(x: &Matrix, block: usize) -> Result<Matrix> {
    if block == 0 || !x.rows().is_multiple_of(block) {
        return Err(Error::dim(
            "block_gram",
            format!("{} rows not divisible into blocks of {block}", x.rows()),
        ));
    }
    let batches = x.rows() / block;
    let mut out = Matrix::zeros(batches, block * block);
    for b in 0..batches {
        for i in 0..block {
            let ri = x.row(b * block + i);
            for j in i..block {
                let rj = x.row(b * block + j);
                let dot: f64 = ri.iter().zip(rj).map(|(a, c)| a * c).sum();
                out.set(b, i * block + j, dot);
                out.set(b, j * block + i, dot);
            }
        }
    }
    Ok(out)
}

fn elementwise(op: &'static str, a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
    if a.shape() == b.shape() {
        return Ok(a.zip_map(b, f));
    }
    if b.rows() == 1 && b.cols() == a.cols() {
        let mut out = a.clone();
        for r in 0..a.rows() {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o = f(*o, bv);
            }
        }
        return Ok(out);
    }
    Err(Error::dim(
        op,
        format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
    ))
}

fn eval(op: &Op, p: &[&Matrix], stats: &mut ForwardStats) -> Result<Matrix> {
    Ok(match op {
        Op::Input(_) | Op::Constant => unreachable!("leaves are not evaluated"),
        Op::MatMul => p[0].matmul(p[1]).map_err(|_| {
            Error::dim(
                "matmul",
                format!("{}x{} * {}x{}", p[0].rows(), p[0].cols(), p[1].rows(), p[1].cols()),
            )
        })?,
        Op::Transpose => p[0].transpose(),
        Op::Add => elementwise("add", p[0], p[1], |a, b| a + b)?,
        Op::Sub => elementwise("sub", p[0], p[1], |a, b| a - b)?,
        Op::Mul => {
            if p[0].shape() != p[1].shape() {
                return Err(Error::dim(
                    "mul",
                    format!("{:?} vs {:?}", p[0].shape(), p[1].shape()),
                ));
            }
            p[0].zip_map(p[1], |a, b| a * b)
        }
        Op::Scale(c) => p[0].map(|v| v * c),
        Op::Relu => {
            for &v in p[0].data() {
                stats.relu_margin = stats.relu_margin.min(v.abs());
            }
            p[0].map(|v| if v > 0.0 { v } else { 0.0 })
        }
        Op::Sigmoid => p[0].map(sigmoid),
        Op::L2NormRows => {
            let (m, degenerate) = l2_normalize_rows(p[0]);
            if !degenerate.is_empty() {
                log::debug!("l2norm_rows: {} degenerate row(s) zeroed", degenerate.len());
            }
            stats.degenerate_rows += degenerate.len();
            m
        }
        Op::Flatten => p[0].clone().with_shape(1, p[0].len())?,
        Op::Reshape { cols } => {
            if *cols == 0 || !p[0].len().is_multiple_of(*cols) {
                return Err(Error::dim(
                    "reshape",
                    format!("{} elements into {cols} columns", p[0].len()),
                ));
            }
            p[0].clone().with_shape(p[0].len() / cols, *cols)?
        }
        Op::Concat => {
            let rows = p[0].rows();
            if p.iter().any(|m| m.rows() != rows) {
                return Err(Error::dim("concat", "parts have different row counts"));
            }
            let cols: usize = p.iter().map(|m| m.cols()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for m in p {
                    data.extend_from_slice(m.row(r));
                }
            }
            Matrix::new(rows, cols, data)?
        }
        Op::Mean => Matrix::scalar(p[0].data().iter().sum::<f64>() / p[0].len() as f64),
        Op::Sum => Matrix::scalar(p[0].data().iter().sum()),
        Op::Square => p[0].map(|v| v * v),
        Op::Sqrt => {
            if p[0].data().iter().any(|&v| v < 0.0) {
                return Err(Error::contract("sqrt of a negative value"));
            }
            p[0].map(f64::sqrt)
        }
        Op::BlockGram { block } => block_gram(p[0], *block)?,
        Op::BceWithLogits => {
            if p[0].shape() != p[1].shape() {
                return Err(Error::dim(
                    "bce_with_logits",
                    format!("{:?} vs {:?}", p[0].shape(), p[1].shape()),
                ));
            }
            let total: f64 = p[0]
                .data()
                .iter()
                .zip(p[1].data())
                .map(|(&z, &y)| softplus(z) - z * y)
                .sum();
            Matrix::scalar(total / p[0].len() as f64)
        }
    })
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

/// Gradient of the loss with respect to each parent, given the upstream
/// gradient `g` of this node's output `y`.
fn local_grads(op: &Op, p: &[&Matrix], y: &Matrix, g: &Matrix) -> Vec<Matrix> {
    match op {
        Op::Input(_) | Op::Constant => vec![],
        Op::MatMul => vec![
            g.matmul(&p[1].transpose()).unwrap(),
            p[0].transpose().matmul(g).unwrap(),
        ],
        Op::Transpose => vec![g.transpose()],
        Op::Add | Op::Sub => {
            let sign = if matches!(op, Op::Add) { 1.0 } else { -1.0 };
            let gb = if p[1].shape() == g.shape() {
                g.clone()
            } else {
                column_sums(g)
            };
            vec![g.clone(), gb.map(|v| sign * v)]
        }
        Op::Mul => vec![g.zip_map(p[1], |a, b| a * b), g.zip_map(p[0], |a, b| a * b)],
        Op::Scale(c) => vec![g.map(|v| v * c)],
        Op::Relu => vec![g.zip_map(p[0], |gv, x| if x > 0.0 { gv } else { 0.0 })],
        Op::Sigmoid => vec![g.zip_map(y, |gv, s| gv * s * (1.0 - s))],
        Op::L2NormRows => {
            let mut dx = Matrix::zeros(p[0].rows(), p[0].cols());
            for r in 0..p[0].rows() {
                let norm = p[0].row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < NORM_FLOOR {
                    continue;
                }
                let yr = y.row(r);
                let gr = g.row(r);
                let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for ((d, &gv), &yv) in dx.row_mut(r).iter_mut().zip(gr).zip(yr) {
                    *d = (gv - yv * proj) / norm;
                }
            }
            vec![dx]
        }
        Op::Flatten | Op::Reshape { .. } => {
            vec![g.clone().with_shape(p[0].rows(), p[0].cols()).unwrap()]
        }
        Op::Concat => {
            let mut offset = 0;
            p.iter()
                .map(|part| {
                    let mut d = Matrix::zeros(part.rows(), part.cols());
                    for r in 0..part.rows() {
                        d.row_mut(r)
                            .copy_from_slice(&g.row(r)[offset..offset + part.cols()]);
                    }
                    offset += part.cols();
                    d
                })
                .collect()
        }
        Op::Mean => {
            let n = p[0].len() as f64;
            vec![Matrix::filled(p[0].rows(), p[0].cols(), g.data()[0] / n)]
        }
        Op::Sum => vec![Matrix::filled(p[0].rows(), p[0].cols(), g.data()[0])],
        Op::Square => vec![g.zip_map(p[0], |gv, x| 2.0 * x * gv)],
        Op::Sqrt => vec![g.zip_map(y, |gv, s| if s > 0.0 { 0.5 * gv / s } else { 0.0 })],
        Op::BlockGram { block } => {
            let m = *block;
            let x = p[0];
            let mut dx = Matrix::zeros(x.rows(), x.cols());
            for b in 0..g.rows() {
                let gb = g.row(b);
                for i in 0..m {
                    let di: Vec<f64> = {
                        let mut acc = vec![0.0; x.cols()];
                        for j in 0..m {
                            let coeff = gb[i * m + j] + gb[j * m + i];
                            if coeff == 0.0 {
                                continue;
                            }
                            for (a, &xv) in acc.iter_mut().zip(x.row(b * m + j)) {
                                *a += coeff * xv;
                            }
                        }
                        acc
                    };
                    dx.row_mut(b * m + i).copy_from_slice(&di);
                }
            }
            vec![dx]
        }
        Op::BceWithLogits => {
            let n = p[0].len() as f64;
            let scale = g.data()[0] / n;
            vec![
                p[0].zip_map(p[1], |z, t| scale * (sigmoid(z) - t)),
                p[0].map(|z| -scale * z),
            ]
        }
    }
}
