use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DenseMatrix;

/// A learnable matrix together with its accumulated gradient.
///
/// `version` increments on every value mutation; forward caches record it so
/// a backward pass against mutated parameters is detected.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    value: DenseMatrix,
    grad: DenseMatrix,
    version: u64,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: DenseMatrix) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: DenseMatrix::zeros(r, c),
            version: 0,
        }
    }

    #[inline]
    pub fn value(&self) -> &DenseMatrix {
        &self.value
    }

    #[inline]
    pub fn grad(&self) -> &DenseMatrix {
        &self.grad
    }

    #[inline]
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    /// Mutable access to the values; bumps the version.
    pub fn value_mut(&mut self) -> &mut DenseMatrix {
        self.version += 1;
        &mut self.value
    }

    pub fn set_value(&mut self, value: DenseMatrix) -> Result<()> {
        if !value.same_shape(&self.value) {
            return Err(Error::dim("set_value", self.value.shape_str(), value.shape_str()));
        }
        self.version += 1;
        self.value = value;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.as_mut_slice().fill(0.0);
    }

    pub fn accumulate_grad(&mut self, g: &DenseMatrix) -> Result<()> {
        self.grad
            .add_assign(g)
            .map_err(|_| Error::dim("accumulate_grad", self.name.clone(), g.shape_str()))
    }

    pub(crate) fn check_version(&self, seen: u64) -> Result<()> {
        if self.version == seen {
            Ok(())
        } else {
            Err(Error::StaleCache {
                name: self.name.clone(),
            })
        }
    }
}

/// AdamW hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Per-parameter moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
    pub t: u64,
}

impl AdamWState {
    pub fn for_param(p: &ParamTensor) -> Self {
        let (r, c) = p.shape();
        Self {
            m: DenseMatrix::zeros(r, c),
            v: DenseMatrix::zeros(r, c),
            t: 0,
        }
    }
}

/// One decoupled-weight-decay Adam update of `param` from its current gradient.
pub fn adamw_step(param: &mut ParamTensor, state: &mut AdamWState, hp: &AdamW) -> Result<()> {
    if !state.m.same_shape(param.value()) || !state.v.same_shape(param.value()) {
        return Err(Error::dim(
            "adamw_step",
            param.value().shape_str(),
            state.m.shape_str(),
        ));
    }
    if !param.grad.all_finite() {
        return Err(Error::NonFinite(param.name.clone()));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);

    let grad = param.grad.as_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    param.version += 1;
    let value = param.value.as_mut_slice();
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value[i] -= hp.lr * (m_hat / (v_hat.sqrt() + hp.eps) + hp.weight_decay * value[i]);
    }
    Ok(())
}
