//! Bias-corrected Adam updates over a network's flattened parameter list.

use super::{Gradients, Network, NnError, TrainConfig};

/// First/second-moment accumulators mirroring every trainable parameter,
/// plus the step counter and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(net: &mut Network, cfg: &TrainConfig) -> Self {
        let sizes: Vec<usize> = net.param_slices_mut().iter().map(|s| s.len()).collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update in place:
/// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`, then
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)` with the usual bias corrections.
pub fn adam_step(
    net: &mut Network,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<(), NnError> {
    let mut params = net.param_slices_mut();
    let grad_slices = grads.slices();
    if params.len() != grad_slices.len()
        || params
            .iter()
            .zip(&grad_slices)
            .any(|(p, g)| p.len() != g.len())
        || state.m.len() != params.len()
    {
        return Err(NnError::ShapeMismatch(
            params.iter().map(|p| p.len()).collect(),
            grad_slices.iter().map(|g| g.len()).collect(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grad_slices)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
