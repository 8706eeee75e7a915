use crate::error::{Error, Result};

/// Adam moments. Steps ascend: the objective is maximized.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut [f64], gradient: &[f64], lr: f64) -> Result<()> {
    if params.len() != gradient.len() || state.m.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: params {}, gradient {}, moments {}",
            params.len(),
            gradient.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = gradient[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] += lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
