//! Reverse-mode tape.
//!
//! Every op appends one node whose parents precede it, so the node vector is
//! already a topological order and backward is a single reverse sweep.

use std::collections::HashMap;

use super::{gemm, softmax_into, MatRef, ParamId, ParamStore, Tensor, NORM_EPS};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Var, Var),
    HCat(Vec<Var>),
    VStack(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSumExpRows(Var),
    NormalizeRows(Var),
    RowDot(Var, Var),
    Sum(Var),
    SumRows(Var),
}

struct Node {
    /// `None` for parameters, whose values stay in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    /// A graph with no parameter store; only inputs and constants.
    pub fn detached() -> Graph<'static> {
        Graph {
            store: None,
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.expect("param node without store").value(*id),
            _ => unreachable!("non-param node without value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        value.debug_assert_finite(op_name(&op));
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable leaf (gradient reported by [`Gradients::wrt`]).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, true)
    }

    /// A leaf treated as a constant: no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    /// The leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        assert!(self.store.is_some(), "param() on a detached graph");
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(Error::dim("matmul", format!("{} x {}", ta.shape(), tb.shape())));
        }
        let mut out = vec![0.0; ta.rows() * tb.cols()];
        gemm(ta.mat(), tb.mat(), &mut out, 0.0);
        let t = Tensor::matrix(ta.rows(), tb.cols(), out)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::MatMul(a, b), ng))
    }

    /// `a * b^T` without materializing the transpose.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(Error::dim(
                "matmul_t",
                format!("{} x {}^T", ta.shape(), tb.shape()),
            ));
        }
        let mut out = vec![0.0; ta.rows() * tb.rows()];
        gemm(ta.mat(), tb.mat().t(), &mut out, 0.0);
        let t = Tensor::matrix(ta.rows(), tb.rows(), out)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::MatMulT(a, b), ng))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a).transpose();
        let ng = self.needs(a);
        self.push(t, Op::Transpose(a), ng)
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.shape(), data)
        } else if tb.len() == 1 {
            let y = tb.data()[0];
            Ok(ta.map(|x| f(x, y)))
        } else if ta.len() == 1 {
            let x = ta.data()[0];
            Ok(tb.map(|y| f(x, y)))
        } else {
            Err(Error::dim(op, format!("{} vs {}", ta.shape(), tb.shape())))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("add", a, b, |x, y| x + y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("sub", a, b, |x, y| x - y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary("mul", a, b, |x, y| x * y)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| x * c);
        let ng = self.needs(a);
        self.push(t, Op::Scale(a, c), ng)
    }

    /// Adds `row` (a vector or 1 x n matrix) to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(Error::dim("add_row", format!("{} + {}", ta.shape(), tr.shape())));
        }
        let c = ta.cols();
        let mut t = ta.clone();
        for (i, x) in t.data_mut().iter_mut().enumerate() {
            *x += tr.data()[i % c];
        }
        let ng = self.needs(a) || self.needs(row);
        Ok(self.push(t, Op::AddRow(a, row), ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(super::sigmoid);
        let ng = self.needs(a);
        self.push(t, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        let ng = self.needs(a);
        self.push(t, Op::Tanh(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(super::relu);
        let ng = self.needs(a);
        self.push(t, Op::Relu(a), ng)
    }

    /// Concatenation of two rank-1 vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = super::concat(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::Concat(a, b), ng))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn hcat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::dim("hcat", "no operands"));
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::dim("hcat", format!("{} rows vs {rows}", t.rows())));
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let t = Tensor::matrix(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(t, Op::HCat(parts.to_vec()), ng))
    }

    /// Row-wise stacking of matrices (or vectors as rows) with equal widths.
    pub fn vstack(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::dim("vstack", "no operands"));
        }
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(Error::dim("vstack", format!("{} cols vs {cols}", t.cols())));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let t = Tensor::matrix(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(t, Op::VStack(parts.to_vec()), ng))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        let c = ta.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            if r >= ta.rows() {
                return Err(Error::dim("gather_rows", format!("row {r} of {}", ta.shape())));
            }
            data.extend_from_slice(ta.row(r));
        }
        let t = Tensor::matrix(rows.len(), c, data)?;
        let ng = self.needs(a);
        Ok(self.push(t, Op::GatherRows(a, rows.to_vec()), ng))
    }

    /// Softmax of each row; for a vector this is the ordinary softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.cols() == 0 {
            return Err(Error::dim("softmax", "empty input"));
        }
        let mut t = ta.clone();
        let c = ta.cols();
        for r in 0..ta.rows() {
            softmax_into(ta.row(r), &mut t.data_mut()[r * c..(r + 1) * c]);
        }
        let ng = self.needs(a);
        Ok(self.push(t, Op::SoftmaxRows(a), ng))
    }

    /// `log(sum(exp(row)))` for each row, as a column.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.cols() == 0 {
            return Err(Error::dim("log_sum_exp_rows", "empty rows"));
        }
        let data = (0..ta.rows()).map(|r| super::log_sum_exp(ta.row(r))).collect();
        let t = Tensor::matrix(ta.rows(), 1, data)?;
        let ng = self.needs(a);
        Ok(self.push(t, Op::LogSumExpRows(a), ng))
    }

    /// Each row divided by `max(norm, NORM_EPS)`.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let mut t = ta.clone();
        let c = ta.cols();
        for r in 0..ta.rows() {
            let n = super::norm(ta.row(r)).max(NORM_EPS);
            t.data_mut()[r * c..(r + 1) * c].iter_mut().for_each(|x| *x /= n);
        }
        let ng = self.needs(a);
        self.push(t, Op::NormalizeRows(a), ng)
    }

    /// Dot product of corresponding rows, as a column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() || ta.cols() != tb.cols() {
            return Err(Error::dim("row_dot", format!("{} vs {}", ta.shape(), tb.shape())));
        }
        let data = (0..ta.rows()).map(|r| super::dot(ta.row(r), tb.row(r))).collect();
        let t = Tensor::matrix(ta.rows(), 1, data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(t, Op::RowDot(a, b), ng))
    }

    /// Cosine similarity of two equal-length vectors (1 x 1 result).
    pub fn cosine_sim(&mut self, u: Var, v: Var) -> Result<Var> {
        if self.value(u).len() != self.value(v).len() {
            return Err(Error::dim(
                "cosine_sim",
                format!("{} vs {}", self.value(u).shape(), self.value(v).shape()),
            ));
        }
        let nu = self.normalize_rows(u);
        let nv = self.normalize_rows(v);
        self.row_dot(nu, nv)
    }

    /// Sum of all entries (1 x 1).
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let ng = self.needs(a);
        self.push(Tensor::scalar(total), Op::Sum(a), ng)
    }

    /// Column sums, as a 1 x cols row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let c = ta.cols();
        let mut data = vec![0.0; c];
        for r in 0..ta.rows() {
            for (d, x) in data.iter_mut().zip(ta.row(r)) {
                *d += x;
            }
        }
        let t = Tensor::matrix(1, c, data).expect("row shape");
        let ng = self.needs(a);
        self.push(t, Op::SumRows(a), ng)
    }

    /// Reverse sweep from a one-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::dim(
                "backward",
                format!("output must be a single value, got {}", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(out.shape(), 1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let leaf = matches!(node.op, Op::Input | Op::Constant | Op::Param(_));
            if leaf {
                continue;
            }
            let Some(dout) = grads[i].take() else {
                continue;
            };
            self.propagate(Var(i), &dout, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> Option<&'g mut Tensor> {
        if !self.needs(v) {
            return None;
        }
        let shape = self.value(v).shape();
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(shape)))
    }

    fn acc_map(
        &self,
        grads: &mut [Option<Tensor>],
        v: Var,
        dout: &Tensor,
        f: impl Fn(usize, f64) -> f64,
    ) {
        if let Some(g) = self.acc(grads, v) {
            for (k, (gi, &d)) in g.data_mut().iter_mut().zip(dout.data()).enumerate() {
                *gi += f(k, d);
            }
        }
    }

    /// Gradient of a binary elementwise op with scalar broadcasting;
    /// `df(k, x_val, y_val)` is the local derivative at flat index k of the output.
    fn acc_broadcast(
        &self,
        grads: &mut [Option<Tensor>],
        v: Var,
        dout: &Tensor,
        local: impl Fn(usize) -> f64,
    ) {
        let len = self.value(v).len();
        if let Some(g) = self.acc(grads, v) {
            if len == dout.len() {
                for (k, gi) in g.data_mut().iter_mut().enumerate() {
                    *gi += dout.data()[k] * local(k);
                }
            } else {
                let total: f64 = dout.data().iter().enumerate().map(|(k, d)| d * local(k)).sum();
                g.data_mut()[0] += total;
            }
        }
    }

    fn propagate(&self, me: Var, dout: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[me.0];
        let out = self.value(me);
        match &node.op {
            Op::Input | Op::Constant | Op::Param(_) => {}
            &Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let d = MatRef::new(dout.data(), ta.rows(), tb.cols());
                if let Some(ga) = self.acc(grads, a) {
                    gemm(d, tb.mat().t(), ga.data_mut(), 1.0);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gemm(ta.mat().t(), d, gb.data_mut(), 1.0);
                }
            }
            &Op::MatMulT(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let d = MatRef::new(dout.data(), ta.rows(), tb.rows());
                if let Some(ga) = self.acc(grads, a) {
                    gemm(d, tb.mat(), ga.data_mut(), 1.0);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gemm(d.t(), ta.mat(), gb.data_mut(), 1.0);
                }
            }
            &Op::Transpose(a) => {
                let dt = dout.transpose();
                self.acc_map(grads, a, &dt, |_, d| d);
            }
            &Op::Add(a, b) => {
                self.acc_broadcast(grads, a, dout, |_| 1.0);
                self.acc_broadcast(grads, b, dout, |_| 1.0);
            }
            &Op::Sub(a, b) => {
                self.acc_broadcast(grads, a, dout, |_| 1.0);
                self.acc_broadcast(grads, b, dout, |_| -1.0);
            }
            &Op::Mul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let at = |t: &Tensor, k: usize| if t.len() == 1 { t.data()[0] } else { t.data()[k] };
                self.acc_broadcast(grads, a, dout, |k| at(tb, k));
                self.acc_broadcast(grads, b, dout, |k| at(ta, k));
            }
            &Op::Scale(a, c) => self.acc_map(grads, a, dout, |_, d| d * c),
            &Op::AddRow(a, row) => {
                self.acc_map(grads, a, dout, |_, d| d);
                let c = out.cols();
                if let Some(gr) = self.acc(grads, row) {
                    for (k, d) in dout.data().iter().enumerate() {
                        gr.data_mut()[k % c] += d;
                    }
                }
            }
            &Op::Sigmoid(a) => self.acc_map(grads, a, dout, |k, d| {
                let y = out.data()[k];
                d * y * (1.0 - y)
            }),
            &Op::Tanh(a) => self.acc_map(grads, a, dout, |k, d| {
                let y = out.data()[k];
                d * (1.0 - y * y)
            }),
            &Op::Relu(a) => {
                let x = self.value(a);
                self.acc_map(grads, a, dout, |k, d| if x.data()[k] > 0.0 { d } else { 0.0 })
            }
            &Op::Concat(a, b) => {
                let n = self.value(a).len();
                if let Some(ga) = self.acc(grads, a) {
                    for (g, d) in ga.data_mut().iter_mut().zip(&dout.data()[..n]) {
                        *g += d;
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for (g, d) in gb.data_mut().iter_mut().zip(&dout.data()[n..]) {
                        *g += d;
                    }
                }
            }
            Op::HCat(parts) => {
                let (rows, cols) = (out.rows(), out.cols());
                let mut offset = 0;
                for &p in parts {
                    let pc = self.value(p).cols();
                    if let Some(gp) = self.acc(grads, p) {
                        for r in 0..rows {
                            let src = &dout.data()[r * cols + offset..r * cols + offset + pc];
                            for (g, d) in gp.data_mut()[r * pc..(r + 1) * pc].iter_mut().zip(src) {
                                *g += d;
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::VStack(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(gp) = self.acc(grads, p) {
                        for (g, d) in gp.data_mut().iter_mut().zip(&dout.data()[offset..offset + n]) {
                            *g += d;
                        }
                    }
                    offset += n;
                }
            }
            Op::GatherRows(a, rows) => {
                let c = out.cols();
                if let Some(ga) = self.acc(grads, *a) {
                    for (r, &src) in rows.iter().enumerate() {
                        let d = &dout.data()[r * c..(r + 1) * c];
                        for (g, x) in ga.data_mut()[src * c..(src + 1) * c].iter_mut().zip(d) {
                            *g += x;
                        }
                    }
                }
            }
            &Op::SoftmaxRows(a) => {
                let c = out.cols();
                if let Some(ga) = self.acc(grads, a) {
                    for r in 0..out.rows() {
                        let y = out.row(r);
                        let d = &dout.data()[r * c..(r + 1) * c];
                        let inner = super::dot(y, d);
                        for k in 0..c {
                            ga.data_mut()[r * c + k] += y[k] * (d[k] - inner);
                        }
                    }
                }
            }
            &Op::LogSumExpRows(a) => {
                let x = self.value(a);
                let c = x.cols();
                if let Some(ga) = self.acc(grads, a) {
                    for r in 0..x.rows() {
                        let lse = out.data()[r];
                        let d = dout.data()[r];
                        for (k, xi) in x.row(r).iter().enumerate() {
                            ga.data_mut()[r * c + k] += d * (xi - lse).exp();
                        }
                    }
                }
            }
            &Op::NormalizeRows(a) => {
                let x = self.value(a);
                let c = x.cols();
                if let Some(ga) = self.acc(grads, a) {
                    for r in 0..x.rows() {
                        let raw = super::norm(x.row(r));
                        let d = &dout.data()[r * c..(r + 1) * c];
                        let g = &mut ga.data_mut()[r * c..(r + 1) * c];
                        if raw >= NORM_EPS {
                            let y = out.row(r);
                            let inner = super::dot(y, d);
                            for k in 0..c {
                                g[k] += (d[k] - y[k] * inner) / raw;
                            }
                        } else {
                            for k in 0..c {
                                g[k] += d[k] / NORM_EPS;
                            }
                        }
                    }
                }
            }
            &Op::RowDot(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let c = ta.cols();
                if let Some(ga) = self.acc(grads, a) {
                    for r in 0..ta.rows() {
                        let d = dout.data()[r];
                        for (g, y) in ga.data_mut()[r * c..(r + 1) * c].iter_mut().zip(tb.row(r)) {
                            *g += d * y;
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for r in 0..ta.rows() {
                        let d = dout.data()[r];
                        for (g, x) in gb.data_mut()[r * c..(r + 1) * c].iter_mut().zip(ta.row(r)) {
                            *g += d * x;
                        }
                    }
                }
            }
            &Op::Sum(a) => {
                let d = dout.data()[0];
                self.acc_map(grads, a, &Tensor::filled(self.value(a).shape(), d), |_, x| x);
            }
            &Op::SumRows(a) => {
                let c = out.cols();
                if let Some(ga) = self.acc(grads, a) {
                    for (k, g) in ga.data_mut().iter_mut().enumerate() {
                        *g += dout.data()[k % c];
                    }
                }
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input => "input",
        Op::Constant => "constant",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::MatMulT(..) => "matmul_t",
        Op::Transpose(_) => "transpose",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddRow(..) => "add_row",
        Op::Sigmoid(_) => "sigmoid",
        Op::Tanh(_) => "tanh",
        Op::Relu(_) => "relu",
        Op::Concat(..) => "concat",
        Op::HCat(_) => "hcat",
        Op::VStack(_) => "vstack",
        Op::GatherRows(..) => "gather_rows",
        Op::SoftmaxRows(_) => "softmax",
        Op::LogSumExpRows(_) => "log_sum_exp_rows",
        Op::NormalizeRows(_) => "normalize_rows",
        Op::RowDot(..) => "row_dot",
        Op::Sum(_) => "sum",
        Op::SumRows(_) => "sum_rows",
    }
}

/// Result of a backward sweep: gradients for inputs and parameters.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf, or `None` if nothing downstream consumed it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Moves parameter gradients out in id order, releasing the graph's
    /// borrow of the store.
    pub fn take_param_grads(&mut self, graph: &Graph<'_>) -> Vec<(ParamId, Tensor)> {
        let mut ids: Vec<(ParamId, Var)> = graph.params.iter().map(|(&p, &v)| (p, v)).collect();
        ids.sort();
        ids.into_iter()
            .filter_map(|(id, v)| self.grads[v.0].take().map(|g| (id, g)))
            .collect()
    }

    /// Adds parameter gradients into the store's accumulators.
    pub fn accumulate(&self, graph: &Graph<'_>, store: &mut ParamStore) {
        let mut ids: Vec<(&ParamId, &Var)> = graph.params.iter().collect();
        ids.sort();
        for (&id, &v) in ids {
            if let Some(g) = &self.grads[v.0] {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}
