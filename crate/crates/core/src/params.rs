//! Named trainable parameters.
//!
//! Naming scheme: `find/<word>`, `describe/W`, `describe/b`, `measure/W1`,
//! `measure/b1`, `measure/W2`, `measure/b2`, `lstm/<which>/<gate>`,
//! `fusion/<name>`, `kb/seed_proj`, `kb/seed_bias` and `embed/words`.
//! `find/<word>` and the LSTM gate tensors carry their bias as the last
//! column.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore<S> {
    tensors: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> ParameterStore<S> {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }

    /// Inserts (or replaces) a parameter; it is marked as requiring gradients.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) {
        self.tensors.insert(name.into(), tensor.with_requires_grad());
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Entries in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<S>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Sets every gradient slot to zeros.
    pub fn zero_grad(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    /// Rounds every value to single precision so the store survives a
    /// checkpoint round trip unchanged.
    pub fn round_to_storage(&mut self) {
        for t in self.tensors.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = v.round_to_storage());
        }
    }
}

/// Half-width of the uniform initialisation range for a weight matrix.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `[rows, cols]` matrix with entries ~ U(-s, s), s from [`glorot_limit`].
pub fn glorot_matrix<S: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor<S> {
    glorot_with_bias(rng, rows, cols, 0)
}

/// `[rows, cols + bias_cols]` matrix whose trailing `bias_cols` columns are zero.
pub fn glorot_with_bias<S: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize, bias_cols: usize) -> Tensor<S> {
    let s = glorot_limit(cols, rows);
    let width = cols + bias_cols;
    let mut data = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        for j in 0..width {
            let v = if j < cols { rng.random_range(-s..s) } else { 0.0 };
            data.push(S::lit(v));
        }
    }
    Tensor::matrix(rows, width, data).expect("non-empty init shape")
}
