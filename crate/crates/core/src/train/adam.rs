//! Bias-corrected Adam over named parameter blocks.

use ndarray::{ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// First moments, one vector per block.
    pub m: Vec<Vec<f64>>,
    /// Second moments, one vector per block.
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// One Adam update of every block in `params`. `grads` must list the same
/// blocks in the same order. The state is untouched when any gradient is
/// non-finite.
pub fn adam_step(
    params: &mut [(&str, ArrayViewMutD<'_, f64>)],
    grads: &[(&str, ArrayViewD<'_, f64>)],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!(
            "{} parameter blocks, {} gradient blocks",
            params.len(),
            grads.len()
        )));
    }
    for ((pname, p), (gname, g)) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "block {pname} is {:?}, gradient {gname} is {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {gname}")));
        }
    }
    if state.m.is_empty() {
        state.m = grads.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != grads.len()
        || state
            .m
            .iter()
            .zip(grads)
            .any(|(m, (_, g))| m.len() != g.len())
    {
        return Err(Error::Shape(
            "optimizer state does not match parameter blocks".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (b, ((_, p), (_, g))) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[b], &mut state.v[b]);
        for (k, (p, g)) in p.iter_mut().zip(g.iter()).enumerate() {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
