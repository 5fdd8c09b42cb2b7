//! Adam, plateau halving of the learning rate and early stopping.

use crate::error::{Error, Result};

use super::params::{project_constraints, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning-rate plateau and early-stopping thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Non-improving epochs before the learning rate is multiplied by `factor`.
    pub plateau_patience: usize,
    pub factor: f64,
    /// Non-improving epochs before training stops.
    pub early_stop_patience: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            plateau_patience: 5,
            factor: 0.5,
            early_stop_patience: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParamVector,
    pub adam_m: ParamVector,
    pub adam_v: ParamVector,
    pub step: u64,
    pub lr: f64,
    pub best_val_loss: f64,
    pub epochs_since_improve: usize,
    pub plateau_count: usize,
    pub adam: AdamConfig,
    pub schedule: Schedule,
}

impl TrainState {
    pub fn new(params: ParamVector, lr: f64) -> Self {
        let zeros = params.zeros_like();
        Self {
            adam_m: zeros.clone(),
            adam_v: zeros,
            params,
            step: 0,
            lr,
            best_val_loss: f64::INFINITY,
            epochs_since_improve: 0,
            plateau_count: 0,
            adam: AdamConfig::default(),
            schedule: Schedule::default(),
        }
    }
}

/// One bias-corrected Adam update followed by [`project_constraints`].
///
/// Non-finite gradients abort before anything is modified.
pub fn adam_step(state: &mut TrainState, grads: &ParamVector) -> Result<()> {
    if !grads.same_shape(&state.params) {
        return Err(Error::Shape("gradient layout does not match parameters".into()));
    }
    if let Some((block, index)) = grads.first_non_finite() {
        return Err(Error::NonFinite {
            block: format!("gradient {block}"),
            index,
        });
    }
    let AdamConfig { beta1, beta2, epsilon } = state.adam;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let lr = state.lr;

    let params = state.params.blocks_mut();
    let ms = state.adam_m.blocks_mut();
    let vs = state.adam_v.blocks_mut();
    for ((((_, p), (_, m)), (_, v)), (_, g)) in params.into_iter().zip(ms).zip(vs).zip(grads.blocks()) {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    project_constraints(&mut state.params);
    Ok(())
}

/// Records one epoch's validation loss. Returns true when it improved on
/// the best so far.
pub fn lr_schedule(state: &mut TrainState, val_loss: f64) -> bool {
    if val_loss < state.best_val_loss {
        state.best_val_loss = val_loss;
        state.plateau_count = 0;
        state.epochs_since_improve = 0;
        return true;
    }
    state.plateau_count += 1;
    state.epochs_since_improve += 1;
    if state.plateau_count >= state.schedule.plateau_patience {
        state.lr *= state.schedule.factor;
        state.plateau_count = 0;
    }
    false
}

pub fn early_stop(state: &TrainState) -> bool {
    state.epochs_since_improve >= state.schedule.early_stop_patience
}
