//! Bias-corrected Adam.

use crate::encoder::{ClassifierModel, ModelConfig, Params};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Params,
    pub second_moment: Params,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: &ModelConfig) -> Self {
        AdamState {
            first_moment: Params::zeros(config),
            second_moment: Params::zeros(config),
            step_count: 0,
        }
    }
}

/// One Adam update of a flat tensor. `step` is the 1-based step number.
pub fn update_slice(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamConfig) {
    let t = step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Applies one update to every parameter of `model`. Gradients are checked
/// for finiteness before anything is modified.
pub fn adam_step(
    model: &mut ClassifierModel,
    grads: &Params,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    if !model.params.same_shape(grads) || !model.params.same_shape(&state.first_moment) {
        return Err(TrainError::Config("gradient shape does not match model".into()));
    }
    if let Some(name) = grads
        .slices()
        .iter()
        .zip(grads.names())
        .find(|(s, _)| s.iter().any(|g| !g.is_finite()))
        .map(|(_, n)| n)
    {
        return Err(TrainError::NonFiniteGradient(name));
    }
    state.step_count += 1;
    let step = state.step_count;
    let tensors = model.params.slices_mut();
    let m = state.first_moment.slices_mut();
    let v = state.second_moment.slices_mut();
    for (((p, g), m), v) in tensors.into_iter().zip(grads.slices()).zip(m).zip(v) {
        update_slice(p, g, m, v, step, cfg);
    }
    Ok(())
}
