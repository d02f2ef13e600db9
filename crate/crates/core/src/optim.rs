//! SGD with a global step-size and Adam with bias-corrected moments.
//!
//! Both consume a descent direction `g`; a TD update `w += a * delta * grad v`
//! is passed in as `g = -delta * grad v`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ADAM_EPSILON: f64 = 1e-8;

pub trait Optimizer: Send {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()>;
}

fn check_shapes(params: &[f64], grad: &[f64]) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: grad.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub alpha: f64,
}

impl SgdConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("step-size must be positive, got {alpha}")));
        }
        Ok(SgdConfig { alpha })
    }
}

pub fn sgd_step(params: &mut [f64], grad: &[f64], cfg: &SgdConfig) -> Result<()> {
    check_shapes(params, grad)?;
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= cfg.alpha * g;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Sgd(pub SgdConfig);

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        sgd_step(params, grad, &self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new(params: usize, alpha: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("step-size must be positive, got {alpha}")));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        Ok(AdamState {
            alpha,
            beta1,
            beta2,
            epsilon: ADAM_EPSILON,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        })
    }
}

pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    check_shapes(params, grad)?;
    check_shapes(&state.m, grad)?;
    state.t += 1;
    state.beta1_pow *= state.beta1;
    state.beta2_pow *= state.beta2;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - state.beta1_pow;
    let c2 = 1.0 - state.beta2_pow;
    for i in 0..params.len() {
        let g = grad[i];
        let m = b1 * state.m[i] + (1.0 - b1) * g;
        let v = b2 * state.v[i] + (1.0 - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        if m != 0.0 {
            params[i] -= state.alpha * (m / c1) / ((v / c2).sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Adam(pub AdamState);

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        adam_step(params, grad, &mut self.0)
    }
}
