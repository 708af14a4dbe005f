//! Dense row-major tensors and the eager kernels the tape is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array with an optional gradient slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    #[serde(default)]
    requires_grad: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidTensor(format!("shape {shape:?} has a zero dimension")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    /// 1-d tensor. Panics on an empty vector.
    pub fn vector(data: Vec<S>) -> Self {
        let n = data.len();
        Self::new(vec![n], data).expect("non-empty vector")
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn scalar(v: S) -> Self {
        Self::vector(vec![v])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![S::zero(); n]).expect("valid zero shape")
    }

    pub fn filled(shape: &[usize], v: S) -> Self {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![v; n]).expect("valid shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> S {
        self.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn with_requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = S::zero()),
            None => self.grad = Some(vec![S::zero(); self.data.len()]),
        }
    }

    /// Adds `scale * g` into the gradient slot, creating it if needed.
    pub fn accumulate_grad(&mut self, g: &[S], scale: S) {
        debug_assert_eq!(g.len(), self.data.len());
        let slot = self.grad.get_or_insert_with(|| vec![S::zero(); self.data.len()]);
        for (s, &v) in slot.iter_mut().zip(g) {
            *s += scale * v;
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// Element `(i, j)` of a matrix.
    pub fn at2(&self, i: usize, j: usize) -> S {
        self.data[i * self.shape[1] + j]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            requires_grad: false,
            grad: None,
        }
    }
}

/// Elementwise binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Mul,
}

/// Pointwise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            // relu(0) = 0 and its subgradient at 0 is 0
            Activation::Relu => {
                if x > S::zero() {
                    x
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => S::one() / (S::one() + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    pub fn derivative<S: Scalar>(self, x: S, y: S) -> S {
        match self {
            Activation::Relu => {
                if x > S::zero() {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Sigmoid => y * (S::one() - y),
            Activation::Tanh => S::one() - y * y,
        }
    }
}

pub fn elementwise_binary<S: Scalar>(op: BinaryOp, a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            op: match op {
                BinaryOp::Add => "add",
                BinaryOp::Mul => "mul",
            },
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| match op {
            BinaryOp::Add => x + y,
            BinaryOp::Mul => x * y,
        })
        .collect();
    Tensor::new(a.shape.clone(), data)
}

pub fn activation<S: Scalar>(kind: Activation, x: &Tensor<S>) -> Tensor<S> {
    x.map(|v| kind.apply(v))
}

/// `W·x (+ b)` for `W: [m, n]`, `x: [n]`, `b: [m]`.
pub fn matvec<S: Scalar>(w: &Tensor<S>, x: &Tensor<S>, b: Option<&Tensor<S>>) -> Result<Tensor<S>> {
    if w.rank() != 2 || x.rank() != 1 || w.shape[1] != x.shape[0] {
        return Err(Error::ShapeMismatch {
            op: "matvec",
            left: w.shape.clone(),
            right: x.shape.clone(),
        });
    }
    let (m, n) = (w.shape[0], w.shape[1]);
    if let Some(b) = b {
        if b.shape != [m] {
            return Err(Error::ShapeMismatch {
                op: "matvec bias",
                left: vec![m],
                right: b.shape.clone(),
            });
        }
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let row = &w.data[i * n..(i + 1) * n];
        let mut acc = S::zero();
        for (&wij, &xj) in row.iter().zip(&x.data) {
            acc += wij * xj;
        }
        if let Some(b) = b {
            acc += b.data[i];
        }
        out.push(acc);
    }
    Tensor::new(vec![m], out)
}

/// `Mᵀ·x` for `M: [n, m]`, `x: [n]`.
pub fn matvec_transposed<S: Scalar>(m: &Tensor<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
    if m.rank() != 2 || x.rank() != 1 || m.shape[0] != x.shape[0] {
        return Err(Error::ShapeMismatch {
            op: "matvec_transposed",
            left: m.shape.clone(),
            right: x.shape.clone(),
        });
    }
    let (rows, cols) = (m.shape[0], m.shape[1]);
    let mut out = vec![S::zero(); cols];
    for i in 0..rows {
        let xi = x.data[i];
        let row = &m.data[i * cols..(i + 1) * cols];
        for (o, &mij) in out.iter_mut().zip(row) {
            *o += mij * xi;
        }
    }
    Tensor::new(vec![cols], out)
}

/// Softmax over the unmasked positions (`mask[i] == true` means "real").
///
/// Masked positions get exactly zero probability.
pub fn masked_softmax<S: Scalar>(scores: &Tensor<S>, mask: &[bool]) -> Result<Tensor<S>> {
    if scores.numel() != mask.len() {
        return Err(Error::ShapeMismatch {
            op: "masked_softmax",
            left: scores.shape.clone(),
            right: vec![mask.len()],
        });
    }
    let max = scores
        .data
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(None, |acc: Option<S>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or(Error::AllMasked)?;
    let exps: Vec<S> = scores
        .data
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { S::zero() })
        .collect();
    let total: S = exps.iter().copied().sum();
    let data = exps.into_iter().map(|e| e / total).collect();
    Tensor::new(scores.shape.clone(), data)
}

pub fn softmax<S: Scalar>(scores: &Tensor<S>) -> Result<Tensor<S>> {
    masked_softmax(scores, &vec![true; scores.numel()])
}
