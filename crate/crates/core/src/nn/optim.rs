use super::{NnError, Result};

/// Adam moments and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, lr, beta1, beta2, eps: 1e-8 }
    }

    /// `lr = 1e-3`, `beta1 = 0.9`, `beta2 = 0.999`.
    pub fn with_defaults(len: usize) -> Self {
        Self::new(len, 1e-3, 0.9, 0.999)
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(NnError::LengthMismatch { expected: params.len(), got: grads.len().min(state.m.len()) });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Patience-based early stopping on a lower-is-better metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopState {
    pub best: f64,
    pub since_improvement: usize,
    pub patience: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self { best: f64::INFINITY, since_improvement: 0, patience }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }
}

/// Records `metric`; returns `true` when it improved on the best so far.
pub fn early_stop_update(state: &mut EarlyStopState, metric: f64) -> bool {
    if metric < state.best {
        state.best = metric;
        state.since_improvement = 0;
        true
    } else {
        state.since_improvement += 1;
        false
    }
}
