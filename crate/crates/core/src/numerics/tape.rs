//! Define-by-run reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] is rebuilt for every forward pass. Each operation appends a
//! node holding its value and the indices of its inputs, so the recording
//! order is always a topological order and [`Tape::backward`] simply walks
//! it in reverse.

use super::matrix::{dot, Matrix};
use super::param::{ParamId, ParamStore};
use crate::error::{MstError, Result};

/// Layer-norm variance guard.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// `scale · a · bᵀ`
    MatMulT(Var, Var, f64),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulScalar(Var, Var),
    DivScalar(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        shift: Var,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    FrobeniusNorm(Var),
    ConcatCols(Vec<Var>),
    Reshape(Var),
    SumAll(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Matrix,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input. Gradients still flow *to* it (useful for tests),
    /// but nothing upstream depends on it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable input that is not a stored parameter.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `scale · a · bᵀ`, fused so attention scores need a single node.
    pub fn matmul_t(&mut self, a: Var, b: Var, scale: f64) -> Result<Var> {
        let mut value = self.value(a).matmul_t(self.value(b))?;
        if scale != 1.0 {
            value.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMulT(a, b, scale), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Adds a 1×c row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (am, rm) = (self.value(a), self.value(row));
        if rm.rows() != 1 || rm.cols() != am.cols() {
            return Err(MstError::Dimension {
                op: "add_row",
                left: am.shape(),
                right: rm.shape(),
            });
        }
        let mut value = am.clone();
        let r = rm.as_slice();
        for i in 0..value.rows() {
            for (x, &b) in value.row_mut(i).iter_mut().zip(r) {
                *x += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(value, Op::AddConst(a), rg)
    }

    fn expect_scalar(&self, s: Var, op: &'static str, other: Var) -> Result<f64> {
        let sm = self.value(s);
        if sm.shape() != (1, 1) {
            return Err(MstError::Dimension {
                op,
                left: self.value(other).shape(),
                right: sm.shape(),
            });
        }
        Ok(sm.get(0, 0))
    }

    /// `s · a` for a 1×1 node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.expect_scalar(s, "mul_scalar", a)?;
        let value = self.value(a).scale(sv);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(value, Op::MulScalar(a, s), rg))
    }

    /// `a / s` for a 1×1 node `s`.
    pub fn div_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.expect_scalar(s, "div_scalar", a)?;
        let value = self.value(a).map(|x| x / sv);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(value, Op::DivScalar(a, s), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    /// Row-wise `(x − mean) / sqrt(var + 1e-5) · gain + shift`.
    pub fn layer_norm_rows(&mut self, x: Var, gain: Var, shift: Var) -> Result<Var> {
        let xm = self.value(x);
        let cols = xm.cols();
        for p in [gain, shift] {
            if self.value(p).shape() != (1, cols) {
                return Err(MstError::Dimension {
                    op: "layer_norm_rows",
                    left: xm.shape(),
                    right: self.value(p).shape(),
                });
            }
        }
        let mut normalized = Matrix::zeros(xm.rows(), cols);
        let mut inv_std = Vec::with_capacity(xm.rows());
        for r in 0..xm.rows() {
            let row = xm.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, &v) in normalized.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            inv_std.push(is);
        }
        let g = self.value(gain).as_slice();
        let b = self.value(shift).as_slice();
        let mut value = normalized.clone();
        for r in 0..value.rows() {
            for ((o, &gi), &bi) in value.row_mut(r).iter_mut().zip(g).zip(b) {
                *o = *o * gi + bi;
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(shift);
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                shift,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    /// 1×1 node holding the Frobenius norm of `a`.
    pub fn frobenius_norm(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).frobenius_norm());
        let rg = self.rg(a);
        self.push(value, Op::FrobeniusNorm(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hstack(&mats)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let value = self.value(a).clone().reshape(rows, cols)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Flattens row-major into a single row.
    pub fn flatten(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        self.reshape(a, 1, n)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::SumAll(a), rg)
    }

    /// Mean negative log-softmax of the labelled class, one label per row.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let z = self.value(logits);
        if labels.len() != z.rows() {
            return Err(MstError::Validation(format!(
                "{} labels for {} logit rows",
                labels.len(),
                z.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= z.cols()) {
            return Err(MstError::Validation(format!(
                "label {bad} out of range for {} classes",
                z.cols()
            )));
        }
        let probs = softmax_rows(z);
        let mut loss = 0.0;
        for (r, &l) in labels.iter().enumerate() {
            let row = z.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[l];
        }
        loss /= labels.len().max(1) as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Reverse pass seeded with ones in the shape of `root`
    /// (i.e. the gradient of the sum of `root`'s entries).
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let (r, c) = self.value(root).shape();
        grads[root.0] = Some(Matrix::filled(r, c, 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut send = |v: Var, contrib: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;

        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    send(*a, g.matmul_t(val(*b)).expect("shapes checked"));
                }
                if needs(*b) {
                    send(*b, val(*a).t_matmul(g).expect("shapes checked"));
                }
            }
            Op::MatMulT(a, b, s) => {
                if needs(*a) {
                    let mut d = g.matmul(val(*b)).expect("shapes checked");
                    if *s != 1.0 {
                        d.as_mut_slice().iter_mut().for_each(|x| *x *= s);
                    }
                    send(*a, d);
                }
                if needs(*b) {
                    let mut d = g.t_matmul(val(*a)).expect("shapes checked");
                    if *s != 1.0 {
                        d.as_mut_slice().iter_mut().for_each(|x| *x *= s);
                    }
                    send(*b, d);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.scale(-1.0));
            }
            Op::AddRow(a, row) => {
                send(*a, g.clone());
                if needs(*row) {
                    let mut acc = vec![0.0; g.cols()];
                    for r in g.row_iter() {
                        for (s, &x) in acc.iter_mut().zip(r) {
                            *s += x;
                        }
                    }
                    send(*row, Matrix::row_vector(&acc));
                }
            }
            Op::Scale(a, s) => send(*a, g.scale(*s)),
            Op::AddConst(a) => send(*a, g.clone()),
            Op::MulScalar(a, s) => {
                let sv = val(*s).get(0, 0);
                if needs(*a) {
                    send(*a, g.scale(sv));
                }
                if needs(*s) {
                    send(*s, Matrix::scalar(dot(g.as_slice(), val(*a).as_slice())));
                }
            }
            Op::DivScalar(a, s) => {
                let sv = val(*s).get(0, 0);
                if needs(*a) {
                    send(*a, g.map(|x| x / sv));
                }
                if needs(*s) {
                    let d = -dot(g.as_slice(), val(*a).as_slice()) / (sv * sv);
                    send(*s, Matrix::scalar(d));
                }
            }
            Op::Relu(a) => {
                let d = g
                    .zip_map(val(*a), "relu", |gi, x| if x > 0.0 { gi } else { 0.0 })
                    .expect("same shape");
                send(*a, d);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let inner = dot(yr, gr);
                    for ((o, &yi), &gi) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = yi * (gi - inner);
                    }
                }
                send(*a, d);
            }
            Op::LayerNorm {
                x,
                gain,
                shift,
                normalized,
                inv_std,
            } => {
                let gv = val(*gain).as_slice();
                let cols = g.cols();
                if needs(*gain) || needs(*shift) {
                    let mut dg = vec![0.0; cols];
                    let mut db = vec![0.0; cols];
                    for r in 0..g.rows() {
                        for c in 0..cols {
                            dg[c] += g.get(r, c) * normalized.get(r, c);
                            db[c] += g.get(r, c);
                        }
                    }
                    send(*gain, Matrix::row_vector(&dg));
                    send(*shift, Matrix::row_vector(&db));
                }
                if needs(*x) {
                    let mut dx = Matrix::zeros(g.rows(), cols);
                    let n = cols as f64;
                    for r in 0..g.rows() {
                        let xh = normalized.row(r);
                        let dxh: Vec<f64> = g.row(r).iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_d = dxh.iter().sum::<f64>() / n;
                        let mean_dx = dot(&dxh, xh) / n;
                        for ((o, &d), &h) in dx.row_mut(r).iter_mut().zip(&dxh).zip(xh) {
                            *o = inv_std[r] * (d - mean_d - h * mean_dx);
                        }
                    }
                    send(*x, dx);
                }
            }
            Op::FrobeniusNorm(a) => {
                let norm = node.value.get(0, 0);
                let gs = g.get(0, 0);
                let a_val = val(*a);
                // subgradient zero at the zero matrix
                let d = if norm > 0.0 {
                    a_val.map(|x| gs * x / norm)
                } else {
                    Matrix::zeros(a_val.rows(), a_val.cols())
                };
                send(*a, d);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if needs(p) {
                        send(p, g.col_block(start, w));
                    }
                    start += w;
                }
            }
            Op::Reshape(a) => {
                let (r, c) = val(*a).shape();
                send(*a, g.clone().reshape(r, c).expect("same size"));
            }
            Op::SumAll(a) => {
                let (r, c) = val(*a).shape();
                send(*a, Matrix::filled(r, c, g.get(0, 0)));
            }
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let scale = g.get(0, 0) / labels.len().max(1) as f64;
                let mut d = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    let v = d.get(r, l);
                    d.set(r, l, v - 1.0);
                }
                d.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
                send(*logits, d);
            }
        }
    }

    /// Adds `weight · ∂root/∂p` into every parameter gradient used on this tape.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore, weight: f64) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(g) = &grads.grads[i] {
                    store.get_mut(id).grad.add_scaled_assign(g, weight);
                }
            }
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}
