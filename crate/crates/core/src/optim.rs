//! ADADELTA.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::scalar::Scalar;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
struct Accumulators<S> {
    sq_grad: Vec<S>,
    sq_delta: Vec<S>,
}

/// Running averages `E[g²]` and `E[Δx²]` per parameter entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta<S> {
    rho: S,
    eps: S,
    state: BTreeMap<String, Accumulators<S>>,
}

impl<S: Scalar> Default for Adadelta<S> {
    fn default() -> Self {
        Self::new(DEFAULT_RHO, DEFAULT_EPS)
    }
}

impl<S: Scalar> Adadelta<S> {
    pub fn new(rho: f64, eps: f64) -> Self {
        Self {
            rho: S::lit(rho),
            eps: S::lit(eps),
            state: BTreeMap::new(),
        }
    }

    pub fn accumulators(&self, name: &str) -> Option<(&[S], &[S])> {
        self.state
            .get(name)
            .map(|a| (a.sq_grad.as_slice(), a.sq_delta.as_slice()))
    }

    /// Applies one update from the gradient slots of `params`.
    ///
    /// Every gradient is checked first; a non-finite entry rejects the whole
    /// step (nothing changes) and names the parameter. Parameters without a
    /// gradient slot are skipped.
    pub fn step(&mut self, params: &mut ParameterStore<S>) -> Result<()> {
        for (name, t) in params.iter() {
            if let Some(g) = t.grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(name.clone()));
                }
            }
        }
        let (rho, eps) = (self.rho, self.eps);
        let one = S::one();
        for (name, t) in params.iter_mut() {
            let Some(g) = t.grad().map(<[S]>::to_vec) else { continue };
            let acc = self.state.entry(name.clone()).or_insert_with(|| Accumulators {
                sq_grad: vec![S::zero(); g.len()],
                sq_delta: vec![S::zero(); g.len()],
            });
            if acc.sq_grad.len() != g.len() {
                return Err(Error::Dimension(format!(
                    "optimizer state for {name} has {} entries, gradient has {}",
                    acc.sq_grad.len(),
                    g.len()
                )));
            }
            for (i, x) in t.data_mut().iter_mut().enumerate() {
                let gi = g[i];
                acc.sq_grad[i] = rho * acc.sq_grad[i] + (one - rho) * gi * gi;
                let dx = -((acc.sq_delta[i] + eps).sqrt() / (acc.sq_grad[i] + eps).sqrt()) * gi;
                acc.sq_delta[i] = rho * acc.sq_delta[i] + (one - rho) * dx * dx;
                *x += dx;
            }
        }
        Ok(())
    }
}
