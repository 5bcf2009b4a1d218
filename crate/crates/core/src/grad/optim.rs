use serde::{Deserialize, Serialize};

/// Adam-family hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamHyper {
    /// RAdam defaults: learning rate 5e-4, no weight decay.
    pub fn radam() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    /// AdamW defaults: learning rate 1e-3, decoupled weight decay 1e-2.
    pub fn adamw() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-2,
            ..Self::radam()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    RAdam,
    AdamW,
}

/// Moment estimates and step counter of one optimizer over a flat parameter buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub hyper: AdamHyper,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    /// Per-parameter decay flags (AdamW only); empty means decay everywhere.
    decay: Vec<bool>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, hyper: AdamHyper, n: usize) -> Self {
        Self {
            kind,
            hyper,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            decay: Vec::new(),
        }
    }

    /// Restricts decoupled weight decay to entries flagged `true`.
    pub fn with_decay_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.m.len(), "decay mask length");
        self.decay = mask;
        self
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        match self.kind {
            OptimizerKind::RAdam => radam_step(self, params, grads),
            OptimizerKind::AdamW => adamw_step(self, params, grads),
        }
    }
}

/// Rectified Adam. While the variance estimate is unreliable (`rho_t <= 5`), the update
/// is the bias-corrected momentum alone. Weight decay, if any, is added to the gradient.
pub fn radam_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) {
    assert_eq!(params.len(), state.m.len(), "parameter count");
    assert_eq!(grads.len(), state.m.len(), "gradient count");
    state.step += 1;
    let AdamHyper {
        lr,
        beta1: b1,
        beta2: b2,
        eps,
        weight_decay,
    } = state.hyper;
    let t = state.step as f64;
    let bc1 = 1.0 - b1.powf(t);
    let b2t = b2.powf(t);
    let bc2 = 1.0 - b2t;
    let rho_inf = 2.0 / (1.0 - b2) - 1.0;
    let rho_t = rho_inf - 2.0 * t * b2t / bc2;
    let rect = (rho_t > 5.0).then(|| {
        ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt()
    });
    for i in 0..params.len() {
        let g = grads[i] + weight_decay * params[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        params[i] -= match rect {
            Some(r) => lr * m_hat * r * bc2.sqrt() / (state.v[i].sqrt() + eps),
            None => lr * m_hat,
        };
    }
}

/// Adam with decoupled weight decay applied to flagged entries.
pub fn adamw_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) {
    assert_eq!(params.len(), state.m.len(), "parameter count");
    assert_eq!(grads.len(), state.m.len(), "gradient count");
    state.step += 1;
    let AdamHyper {
        lr,
        beta1: b1,
        beta2: b2,
        eps,
        weight_decay,
    } = state.hyper;
    let t = state.step as f64;
    let bc1 = 1.0 - b1.powf(t);
    let bc2_sqrt = (1.0 - b2.powf(t)).sqrt();
    for i in 0..params.len() {
        if state.decay.get(i).copied().unwrap_or(true) {
            params[i] *= 1.0 - lr * weight_decay;
        }
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let denom = state.v[i].sqrt() / bc2_sqrt + eps;
        params[i] -= lr / bc1 * state.m[i] / denom;
    }
}
