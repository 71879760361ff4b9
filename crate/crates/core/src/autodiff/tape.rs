//! Wengert-list reverse-mode differentiation.
//!
//! Operations are appended to a [`Tape`] in execution order, so the node
//! index order is already a topological order and the backward pass is a
//! single reverse sweep. A tape is meant to live for one loss evaluation.

use std::fmt;

use super::tensor::{log_sum_exp, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Mul,
    Scale,
    Relu,
    Concat,
    Outer,
    LogSumExp,
    GatherRows,
    Sum,
    Mean,
    Neg,
    Log,
    Exp,
    Reshape,
    Permute,
}

impl OpKind {
    pub const ALL: [OpKind; 17] = [
        OpKind::Leaf,
        OpKind::MatMul,
        OpKind::Add,
        OpKind::Mul,
        OpKind::Scale,
        OpKind::Relu,
        OpKind::Concat,
        OpKind::Outer,
        OpKind::LogSumExp,
        OpKind::GatherRows,
        OpKind::Sum,
        OpKind::Mean,
        OpKind::Neg,
        OpKind::Log,
        OpKind::Exp,
        OpKind::Reshape,
        OpKind::Permute,
    ];
}

impl std::str::FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown op '{s}'"))
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Mul => "mul",
            OpKind::Scale => "scale",
            OpKind::Relu => "relu",
            OpKind::Concat => "concat",
            OpKind::Outer => "outer",
            OpKind::LogSumExp => "log_sum_exp",
            OpKind::GatherRows => "gather_rows",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Neg => "neg",
            OpKind::Log => "log",
            OpKind::Exp => "exp",
            OpKind::Reshape => "reshape",
            OpKind::Permute => "permute",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Concat(Var, Var),
    Outer(Var, Var),
    LogSumExp(Var),
    GatherRows(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    Neg(Var),
    Log(Var),
    Exp(Var),
    Reshape(Var, Vec<usize>),
    Permute(Var, Vec<usize>),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Relu(_) => OpKind::Relu,
            Op::Concat(..) => OpKind::Concat,
            Op::Outer(..) => OpKind::Outer,
            Op::LogSumExp(_) => OpKind::LogSumExp,
            Op::GatherRows(..) => OpKind::GatherRows,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Neg(_) => OpKind::Neg,
            Op::Log(_) => OpKind::Log,
            Op::Exp(_) => OpKind::Exp,
            Op::Reshape(..) => OpKind::Reshape,
            Op::Permute(..) => OpKind::Permute,
        }
    }

    fn operands(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Mul(a, b)
            | Op::Concat(a, b)
            | Op::Outer(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::LogSumExp(a)
            | Op::GatherRows(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Neg(a)
            | Op::Log(a)
            | Op::Exp(a)
            | Op::Reshape(a, _)
            | Op::Permute(a, _) => vec![*a],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    is_param: bool,
    needs_grad: bool,
}

/// Recorded computation graph for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    faulty_adjoint: Option<OpKind>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
    params: Vec<Var>,
}

impl Gradients {
    /// dLoss/dVar, or zeros when `var` does not influence the loss.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    /// Gradient for every parameter leaf, in registration order.
    pub fn params(&self) -> impl Iterator<Item = (Var, Tensor)> + '_ {
        self.params.iter().map(|&p| (p, self.wrt(p)))
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

    /// Negative-control hook: scales every adjoint produced by ops of `kind`
    /// by 1.5 so that gradient checks can be shown to catch a broken rule.
    pub fn corrupt_adjoint(&mut self, kind: OpKind) {
        self.faulty_adjoint = Some(kind);
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, is_param: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            is_param,
            needs_grad: is_param,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let value = {
            let inputs: Vec<&Tensor> = op
                .operands()
                .iter()
                .map(|v| &self.nodes[v.0].value)
                .collect();
            forward(&op, &inputs)?
        };
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "{} produced a non-finite value",
                op.kind()
            )));
        }
        let needs_grad = op.operands().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            is_param: false,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.neg(b)?;
        self.add(a, nb)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.record(Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Relu(a))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Concat(a, b))
    }

    /// Flattened outer product `vec(a bᵀ)`; applied row by row for matrices.
    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Outer(a, b))
    }

    /// Log-sum-exp over the last axis, which is dropped.
    pub fn log_sum_exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::LogSumExp(a))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        self.record(Op::GatherRows(a, idx))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Mean(a))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Neg(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp(a))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        self.record(Op::Reshape(a, shape))
    }

    /// Axis permutation; output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: Vec<usize>) -> Result<Var> {
        self.record(Op::Permute(a, perm))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.permute(a, vec![1, 0])
    }

    /// Recomputes every node from the leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => {
                    let inputs: Vec<&Tensor> = op.operands().iter().map(|v| &values[v.0]).collect();
                    forward(op, &inputs)?
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(loss_value.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            let mut adj = adjoints(&self.nodes, node, &upstream);
            if self.faulty_adjoint == Some(node.op.kind()) {
                for (_, g) in adj.iter_mut() {
                    g.data_mut().iter_mut().for_each(|v| *v *= 1.5);
                }
            }
            for (target, g) in adj {
                if !self.nodes[target.0].needs_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .for_each(|(a, b)| *a += b),
                    slot => *slot = Some(g),
                }
            }
            grads[i] = Some(upstream);
        }

        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
            params: (0..self.nodes.len())
                .filter(|&i| self.nodes[i].is_param)
                .map(Var)
                .collect(),
        })
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn forward(op: &Op, x: &[&Tensor]) -> Result<Tensor> {
    let out = match op {
        Op::Leaf => unreachable!("leaves are never recomputed"),
        Op::MatMul(..) => {
            let (a, b) = (x[0], x[1]);
            if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(shape_err("matmul", a, b));
            }
            let (m, n, p) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            Tensor::from_parts(vec![m, p], matmul_raw(a.data(), b.data(), m, n, p))
        }
        Op::Add(..) | Op::Mul(..) => {
            let (a, b) = (x[0], x[1]);
            let is_add = matches!(op, Op::Add(..));
            if a.shape() != b.shape() {
                return Err(shape_err(if is_add { "add" } else { "mul" }, a, b));
            }
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(p, q)| if is_add { p + q } else { p * q })
                .collect();
            Tensor::from_parts(a.shape().to_vec(), data)
        }
        Op::Scale(_, s) => map(x[0], |v| v * s),
        Op::Relu(_) => map(x[0], |v| if v > 0.0 { v } else { 0.0 }),
        Op::Neg(_) => map(x[0], |v| -v),
        Op::Log(_) => map(x[0], f64::ln),
        Op::Exp(_) => map(x[0], f64::exp),
        Op::Concat(..) => {
            let (a, b) = (x[0], x[1]);
            if a.rank() == 0
                || a.rank() != b.rank()
                || a.shape()[..a.rank() - 1] != b.shape()[..b.rank() - 1]
            {
                return Err(shape_err("concat", a, b));
            }
            let (wa, wb) = (a.last_dim(), b.last_dim());
            let mut data = Vec::with_capacity(a.len() + b.len());
            for (ra, rb) in a.rows().zip(b.rows()) {
                data.extend_from_slice(ra);
                data.extend_from_slice(rb);
            }
            let mut shape = a.shape().to_vec();
            *shape.last_mut().unwrap() = wa + wb;
            Tensor::from_parts(shape, data)
        }
        Op::Outer(..) => {
            let (a, b) = (x[0], x[1]);
            let ok = match (a.rank(), b.rank()) {
                (1, 1) => true,
                (2, 2) => a.shape()[0] == b.shape()[0],
                _ => false,
            };
            if !ok {
                return Err(shape_err("outer", a, b));
            }
            let (wa, wb) = (a.last_dim(), b.last_dim());
            let mut data = Vec::with_capacity(a.outer_len() * wa * wb);
            for (ra, rb) in a.rows().zip(b.rows()) {
                for &p in ra {
                    data.extend(rb.iter().map(|q| p * q));
                }
            }
            let mut shape = a.shape().to_vec();
            *shape.last_mut().unwrap() = wa * wb;
            Tensor::from_parts(shape, data)
        }
        Op::LogSumExp(_) => {
            let a = x[0];
            if a.rank() == 0 {
                return Err(shape_err("log_sum_exp", a, a));
            }
            let data = a.rows().map(log_sum_exp).collect();
            Tensor::from_parts(a.shape()[..a.rank() - 1].to_vec(), data)
        }
        Op::GatherRows(_, idx) => {
            let a = x[0];
            if a.rank() == 0 || idx.is_empty() || idx.iter().any(|&i| i >= a.shape()[0]) {
                return Err(Error::Shape {
                    op: "gather_rows",
                    lhs: a.shape().to_vec(),
                    rhs: vec![idx.iter().copied().max().unwrap_or(0) + 1],
                });
            }
            let inner: usize = a.shape()[1..].iter().product();
            let mut data = Vec::with_capacity(idx.len() * inner);
            for &i in idx {
                data.extend_from_slice(&a.data()[i * inner..(i + 1) * inner]);
            }
            let mut shape = a.shape().to_vec();
            shape[0] = idx.len();
            Tensor::from_parts(shape, data)
        }
        Op::Sum(_) => Tensor::scalar(x[0].data().iter().sum()),
        Op::Mean(_) => Tensor::scalar(x[0].data().iter().sum::<f64>() / x[0].len() as f64),
        Op::Reshape(_, shape) => {
            let a = x[0];
            if shape.iter().product::<usize>() != a.len() || shape.contains(&0) {
                return Err(Error::Shape {
                    op: "reshape",
                    lhs: a.shape().to_vec(),
                    rhs: shape.clone(),
                });
            }
            Tensor::from_parts(shape.clone(), a.data().to_vec())
        }
        Op::Permute(_, perm) => {
            let a = x[0];
            let mut seen = vec![false; a.rank()];
            let valid = perm.len() == a.rank()
                && perm
                    .iter()
                    .all(|&p| p < a.rank() && !std::mem::replace(&mut seen[p], true));
            if !valid {
                return Err(Error::Shape {
                    op: "permute",
                    lhs: a.shape().to_vec(),
                    rhs: perm.clone(),
                });
            }
            permute_raw(a, perm)
        }
    };
    Ok(out)
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(a.shape().to_vec(), a.data().iter().map(|&v| f(v)).collect())
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, n: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * p..(k + 1) * p];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn permute_raw(a: &Tensor, perm: &[usize]) -> Tensor {
    let in_strides = strides(a.shape());
    let out_shape: Vec<usize> = perm.iter().map(|&p| a.shape()[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut data = Vec::with_capacity(a.len());
    let mut index = vec![0usize; out_shape.len()];
    for _ in 0..a.len() {
        let offset: usize = index.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
        data.push(a.data()[offset]);
        for ax in (0..index.len()).rev() {
            index[ax] += 1;
            if index[ax] < out_shape[ax] {
                break;
            }
            index[ax] = 0;
        }
    }
    Tensor::from_parts(out_shape, data)
}

fn adjoints(nodes: &[Node], node: &Node, up: &Tensor) -> Vec<(Var, Tensor)> {
    let val = |v: &Var| &nodes[v.0].value;
    let like = |t: &Tensor, data: Vec<f64>| Tensor::from_parts(t.shape().to_vec(), data);
    match &node.op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (m, n, p) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            let bt = transpose_raw(bv.data(), n, p);
            let at = transpose_raw(av.data(), m, n);
            vec![
                (*a, like(av, matmul_raw(up.data(), &bt, m, p, n))),
                (*b, like(bv, matmul_raw(&at, up.data(), n, m, p))),
            ]
        }
        Op::Add(a, b) => vec![(*a, up.clone()), (*b, up.clone())],
        Op::Mul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let ga = up
                .data()
                .iter()
                .zip(bv.data())
                .map(|(g, q)| g * q)
                .collect();
            let gb = up
                .data()
                .iter()
                .zip(av.data())
                .map(|(g, p)| g * p)
                .collect();
            vec![(*a, like(av, ga)), (*b, like(bv, gb))]
        }
        Op::Scale(a, s) => vec![(*a, map(up, |g| g * s))],
        Op::Relu(a) => {
            let av = val(a);
            let g = up
                .data()
                .iter()
                .zip(av.data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            vec![(*a, like(av, g))]
        }
        Op::Neg(a) => vec![(*a, map(up, |g| -g))],
        Op::Log(a) => {
            let av = val(a);
            let g = up
                .data()
                .iter()
                .zip(av.data())
                .map(|(g, x)| g / x)
                .collect();
            vec![(*a, like(av, g))]
        }
        Op::Exp(a) => {
            let g = up
                .data()
                .iter()
                .zip(node.value.data())
                .map(|(g, y)| g * y)
                .collect();
            vec![(*a, like(val(a), g))]
        }
        Op::Concat(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (wa, wb) = (av.last_dim(), bv.last_dim());
            let mut ga = Vec::with_capacity(av.len());
            let mut gb = Vec::with_capacity(bv.len());
            for r in up.rows() {
                ga.extend_from_slice(&r[..wa]);
                gb.extend_from_slice(&r[wa..wa + wb]);
            }
            vec![(*a, like(av, ga)), (*b, like(bv, gb))]
        }
        Op::Outer(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (wa, wb) = (av.last_dim(), bv.last_dim());
            let mut ga = vec![0.0; av.len()];
            let mut gb = vec![0.0; bv.len()];
            for (r, u) in up.rows().enumerate() {
                let ra = av.row(r);
                let rb = bv.row(r);
                for i in 0..wa {
                    for j in 0..wb {
                        let g = u[i * wb + j];
                        ga[r * wa + i] += g * rb[j];
                        gb[r * wb + j] += g * ra[i];
                    }
                }
            }
            vec![(*a, like(av, ga)), (*b, like(bv, gb))]
        }
        Op::LogSumExp(a) => {
            let av = val(a);
            let w = av.last_dim();
            let mut g = Vec::with_capacity(av.len());
            for (r, row) in av.rows().enumerate() {
                let (lse, gu) = (node.value.data()[r], up.data()[r]);
                g.extend(row.iter().map(|x| gu * (x - lse).exp()));
            }
            debug_assert_eq!(g.len(), av.outer_len() * w);
            vec![(*a, like(av, g))]
        }
        Op::GatherRows(a, idx) => {
            let av = val(a);
            let inner: usize = av.shape()[1..].iter().product();
            let mut g = vec![0.0; av.len()];
            for (r, &i) in idx.iter().enumerate() {
                for (dst, src) in g[i * inner..(i + 1) * inner]
                    .iter_mut()
                    .zip(&up.data()[r * inner..(r + 1) * inner])
                {
                    *dst += src;
                }
            }
            vec![(*a, like(av, g))]
        }
        Op::Sum(a) => {
            let av = val(a);
            vec![(*a, Tensor::filled(av.shape(), up.data()[0]))]
        }
        Op::Mean(a) => {
            let av = val(a);
            vec![(
                *a,
                Tensor::filled(av.shape(), up.data()[0] / av.len() as f64),
            )]
        }
        Op::Reshape(a, _) => vec![(*a, like(val(a), up.data().to_vec()))],
        Op::Permute(a, perm) => {
            let mut inverse = vec![0; perm.len()];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            vec![(*a, permute_raw(up, &inverse))]
        }
    }
}
