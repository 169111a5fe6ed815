use std::sync::atomic::{AtomicU32, Ordering};

use super::tensor::gemm;
use super::{Tensor, TensorError};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    Concat(Vec<Var>),
    Gather(Var, Vec<usize>),
    Sum(Var),
    Transpose(Var),
    Reshape(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::SoftmaxRows(_) => "softmax",
            Op::Concat(_) => "concat",
            Op::Gather(..) => "gather",
            Op::Sum(_) => "sum",
            Op::Transpose(_) => "transpose",
            Op::Reshape(_) => "reshape",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Define-by-run recording of one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, true, Op::Leaf)
    }

    /// Registers a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        &self.nodes[v.index()].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.index()].requires_grad
    }

    /// Gradient from the most recent [`Tape::backward`]; `None` for
    /// constants and for nodes the loss does not depend on.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
        self.grads.get(v.index()).and_then(Option::as_ref)
    }

    /// Signs of every relu input recorded so far, in tape order.
    pub(crate) fn relu_signature(&self) -> Vec<i8> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(x) = node.op {
                sig.extend(
                    self.nodes[x.index()]
                        .value
                        .data()
                        .iter()
                        .map(|&v| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 }),
                );
            }
        }
        sig
    }

    fn push_unchecked(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        let index = u32::try_from(self.nodes.len()).expect("tape overflow");
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var {
            tape: self.id,
            index,
        }
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.index()].requires_grad);
        Ok(self.push_unchecked(value, requires_grad, op))
    }

    fn check(&self, vars: &[Var]) -> Result<(), TensorError> {
        if vars.iter().all(|v| v.tape == self.id) {
            Ok(())
        } else {
            Err(TensorError::ForeignVar)
        }
    }

    fn matrix_dims(&self, op: &'static str, v: Var, other: Var) -> Result<(usize, usize), TensorError> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(TensorError::ShapeMismatch {
                op,
                left: s.to_vec(),
                right: self.shape(other).to_vec(),
            }),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        let (m, k) = self.matrix_dims("matmul", a, b)?;
        let (k2, n) = self.matrix_dims("matmul", b, a)?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut out, 0.0);
        let value = Tensor::new(vec![m, n], out)?;
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) == self.shape(b) {
            Ok(())
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            })
        }
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var, TensorError> {
        self.check(&[a, b])?;
        self.same_shape(op.name(), a, b)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        let value = x.with_data(data);
        self.push(value, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Add(a, b), |p, q| p + q)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Sub(a, b), |p, q| p - q)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with(a, b, Op::Mul(a, b), |p, q| p * q)
    }

    /// Adds a bias vector (shape `[n]` or `[1, n]`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        self.check(&[a, bias])?;
        let n = self.value(a).cols();
        let b = self.value(bias);
        let ok = match b.shape() {
            [m] => *m == n,
            [1, m] => *m == n,
            _ => false,
        };
        if !ok {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: self.shape(a).to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let bd = b.data();
        let x = self.value(a);
        let data = x
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bd).map(|(p, q)| p + q))
            .collect();
        let value = x.with_data(data);
        self.push(value, Op::AddRow(a, bias), &[a, bias])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = self.value(a).map(|v| v * s);
        self.push(value, Op::Scale(a, s), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    /// Softmax over the last axis of every row.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let x = self.value(a);
        let n = x.cols();
        let mut data = Vec::with_capacity(x.len());
        for row in x.data().chunks(n) {
            softmax_into(row, &mut data);
        }
        let value = x.with_data(data);
        self.push(value, Op::SoftmaxRows(a), &[a])
    }

    /// Concatenates along the last axis; leading dims must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        self.check(parts)?;
        let first = *parts.first().ok_or(TensorError::Invalid {
            op: "concat",
            reason: "no inputs".into(),
        })?;
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let rows = self.value(first).rows();
        for &p in &parts[1..] {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: self.shape(first).to_vec(),
                    right: s.to_vec(),
                });
            }
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let mut shape = lead;
        shape.push(total);
        let value = Tensor::new(shape, data)?;
        self.push(value, Op::Concat(parts.to_vec()), parts)
    }

    /// Selects rows of a matrix by index; repeated indices are allowed.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        self.check(&[table])?;
        let t = self.value(table);
        let [rows, cols] = *t.shape() else {
            return Err(TensorError::ShapeMismatch {
                op: "gather",
                left: t.shape().to_vec(),
                right: vec![indices.len()],
            });
        };
        if indices.is_empty() {
            return Err(TensorError::Invalid {
                op: "gather",
                reason: "empty index list".into(),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather",
                    index: i,
                    bound: rows,
                });
            }
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::new(vec![indices.len(), cols], data)?;
        self.push(value, Op::Gather(table, indices.to_vec()), &[table])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let x = self.value(a);
        let [r, c] = *x.shape() else {
            return Err(TensorError::ShapeMismatch {
                op: "transpose",
                left: x.shape().to_vec(),
                right: vec![],
            });
        };
        let value = Tensor::new(vec![c, r], transpose_data(x.data(), r, c))?;
        self.push(value, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check(&[a])?;
        let value = self.value(a).reshaped(shape).map_err(|_| TensorError::ShapeMismatch {
            op: "reshape",
            left: self.shape(a).to_vec(),
            right: shape.to_vec(),
        })?;
        self.push(value, Op::Reshape(a), &[a])
    }

    /// Summed `-log softmax(row)[target]` over the rows of `logits`, one
    /// target per row.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, TensorError> {
        self.check(&[logits])?;
        let x = self.value(logits);
        let v = x.cols();
        if targets.len() != x.rows() {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                left: x.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let mut probs = Vec::with_capacity(x.len());
        let mut loss = 0.0;
        for (row, &t) in x.data().chunks(v).zip(targets) {
            if t >= v {
                return Err(TensorError::IndexOutOfRange {
                    op: "cross_entropy",
                    index: t,
                    bound: v,
                });
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            loss += log_z - row[t];
            probs.extend(row.iter().map(|&z| (z - log_z).exp()));
        }
        let op = Op::CrossEntropy {
            logits,
            targets: targets.to_vec(),
            probs,
        };
        self.push(Tensor::scalar(loss), op, &[logits])
    }

    /// Reverse pass from a scalar `loss`. Previous gradients are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        self.check(&[loss])?;
        let shape = self.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: shape.to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.index() + 1];
        grads[loss.index()] = Some(vec![1.0]);

        for i in (0..=loss.index()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }

        self.grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| match g {
                Some(g) if node.requires_grad => Some(node.value.with_data(g)),
                _ => None,
            })
            .collect();
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.index()].value;
        let wants = |v: Var| self.nodes[v.index()].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let n = val(*b).shape()[1];
                if wants(*a) {
                    // dA = G·Bᵀ
                    let buf = slot(grads, *a, m * k);
                    gemm(m, n, k, g, false, val(*b).data(), true, buf, 1.0);
                }
                if wants(*b) {
                    // dB = Aᵀ·G
                    let buf = slot(grads, *b, k * n);
                    gemm(k, m, n, val(*a).data(), true, g, false, buf, 1.0);
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, wants(*a), g.iter().copied());
                accumulate(grads, *b, wants(*b), g.iter().copied());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, wants(*a), g.iter().copied());
                accumulate(grads, *b, wants(*b), g.iter().map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (x, y) = (val(*a).data(), val(*b).data());
                accumulate(grads, *a, wants(*a), g.iter().zip(y).map(|(g, y)| g * y));
                accumulate(grads, *b, wants(*b), g.iter().zip(x).map(|(g, x)| g * x));
            }
            Op::AddRow(a, bias) => {
                accumulate(grads, *a, wants(*a), g.iter().copied());
                if wants(*bias) {
                    let n = val(*bias).len();
                    let buf = slot(grads, *bias, n);
                    for row in g.chunks(n) {
                        for (acc, v) in buf.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
            }
            Op::Scale(a, s) => accumulate(grads, *a, wants(*a), g.iter().map(|v| v * s)),
            Op::Tanh(a) => {
                let y = node.value.data();
                accumulate(grads, *a, true, g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                accumulate(grads, *a, true, g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)));
            }
            Op::Relu(a) => {
                let x = val(*a).data();
                accumulate(
                    grads,
                    *a,
                    true,
                    g.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }),
                );
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let n = y.cols();
                let mut dx = Vec::with_capacity(y.len());
                for (yr, gr) in y.data().chunks(n).zip(g.chunks(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    dx.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - dot)));
                }
                accumulate(grads, *a, true, dx.into_iter());
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let rows = node.value.rows();
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if wants(p) {
                        let buf = slot(grads, p, rows * w);
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + w];
                            for (acc, v) in buf[r * w..(r + 1) * w].iter_mut().zip(src) {
                                *acc += v;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::Gather(table, indices) => {
                let t = val(*table);
                let cols = t.cols();
                let buf = slot(grads, *table, t.len());
                for (r, &i) in indices.iter().enumerate() {
                    for (acc, v) in buf[i * cols..(i + 1) * cols].iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                        *acc += v;
                    }
                }
            }
            Op::Sum(a) => {
                let n = val(*a).len();
                accumulate(grads, *a, true, std::iter::repeat_n(g[0], n));
            }
            Op::Transpose(a) => {
                let [r, c] = *node.value.shape() else { unreachable!() };
                // node is r×c, input is c×r
                accumulate(grads, *a, true, transpose_data(g, r, c).into_iter());
            }
            Op::Reshape(a) => accumulate(grads, *a, true, g.iter().copied()),
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let v = val(*logits).cols();
                let scale = g[0];
                let mut dx: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (r, &t) in targets.iter().enumerate() {
                    dx[r * v + t] -= scale;
                }
                accumulate(grads, *logits, true, dx.into_iter());
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.index()].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, wanted: bool, contrib: impl Iterator<Item = f64>) {
    if !wanted {
        return;
    }
    match &mut grads[v.index()] {
        Some(buf) => {
            for (acc, c) in buf.iter_mut().zip(contrib) {
                *acc += c;
            }
        }
        slot @ None => *slot = Some(contrib.collect()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_into(row: &[f64], out: &mut Vec<f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    let mut z = 0.0;
    for &v in row {
        let e = (v - max).exp();
        z += e;
        out.push(e);
    }
    for e in &mut out[start..] {
        *e /= z;
    }
}

fn transpose_data(data: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = data[i * c + j];
        }
    }
    out
}
