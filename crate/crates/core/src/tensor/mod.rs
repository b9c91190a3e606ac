//! Dense rank-1/rank-2 tensors with a reverse-mode tape and an Adam optimizer.

mod gemm;
pub mod gradcheck;
mod graph;
mod optim;
mod param;

use std::fmt;

use crate::error::{Error, Result};

pub use graph::{Gradients, Graph, Var};
pub use optim::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use param::{init_uniform, ParamId, ParamStore, Parameter};

pub(crate) use gemm::{gemm, MatRef};

/// Denominator floor used by every norm in the crate.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    /// Vectors behave as a single row wherever a matrix is expected.
    pub fn rows(self) -> usize {
        match self {
            Shape::Vector(_) => 1,
            Shape::Matrix(r, _) => r,
        }
    }

    pub fn cols(self) -> usize {
        match self {
            Shape::Vector(n) => n,
            Shape::Matrix(_, c) => c,
        }
    }

    pub fn len(self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    pub fn rank(self) -> usize {
        match self {
            Shape::Vector(_) => 1,
            Shape::Matrix(..) => 2,
        }
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Vector(n) => vec![n],
            Shape::Matrix(r, c) => vec![r, c],
        }
    }

    pub fn from_dims(dims: &[usize]) -> Result<Shape> {
        match *dims {
            [n] => Ok(Shape::Vector(n)),
            [r, c] => Ok(Shape::Matrix(r, c)),
            _ => Err(Error::dim("shape", format!("rank {} unsupported", dims.len()))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "[{n}]"),
            Shape::Matrix(r, c) => write!(f, "[{r}x{c}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != shape.len() {
            return Err(Error::dim(
                "tensor",
                format!("{} values for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Tensor {
        Tensor {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Tensor {
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn vector(data: Vec<f64>) -> Tensor {
        Tensor {
            shape: Shape::Vector(data.len()),
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor> {
        Tensor::new(Shape::Matrix(rows, cols), data)
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor {
            shape: Shape::Matrix(1, 1),
            data: vec![value],
        }
    }

    /// Stacks equal-length rows into a matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Result<Tensor> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::dim(
                    "from_rows",
                    format!("row {i} has {} columns, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Tensor {
            shape: Shape::Matrix(rows.len(), cols),
            data,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows()
    }

    pub fn cols(&self) -> usize {
        self.shape.cols()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {}", self.shape);
        self.data[0]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn debug_assert_finite(&self, op: &str) {
        debug_assert!(self.is_finite(), "non-finite value produced by {op}");
    }

    pub(crate) fn mat(&self) -> MatRef<'_> {
        MatRef::new(&self.data, self.rows(), self.cols())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: Shape::Matrix(c, r),
            data,
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Standard matrix product; vectors are treated as single rows.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols() != b.rows() {
        return Err(Error::dim(
            "matmul",
            format!("{} x {}", a.shape(), b.shape()),
        ));
    }
    let mut out = vec![0.0; a.rows() * b.cols()];
    gemm(a.mat(), b.mat(), &mut out, 0.0);
    Tensor::matrix(a.rows(), b.cols(), out)
}

pub fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape().rank() != 1 || b.shape().rank() != 1 {
        return Err(Error::dim(
            "concat",
            format!("expected vectors, got {} and {}", a.shape(), b.shape()),
        ));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Ok(Tensor::vector(data))
}

/// Numerically stable softmax with max-subtraction, written into `out`.
pub(crate) fn softmax_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::dim("softmax", "empty input"));
    }
    let mut out = vec![0.0; x.len()];
    softmax_into(x, &mut out);
    Ok(out)
}

pub(crate) fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = x.iter().map(|&v| (v - max).exp()).sum();
    max + total.ln()
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity with both norms floored at [`NORM_EPS`].
///
/// A zero-norm argument yields 0.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim(
            "cosine_sim",
            format!("{} vs {}", u.len(), v.len()),
        ));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu < NORM_EPS || nv < NORM_EPS {
        return Ok(0.0);
    }
    Ok(dot(u, v) / (nu * nv))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}
