use super::{Gradients, Sequential};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize, betas: (f64, f64), eps: f64) -> Self {
        AdamState {
            beta1: betas.0,
            beta2: betas.1,
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn for_network(net: &Sequential, betas: (f64, f64)) -> Self {
        Self::new(net.param_count(), betas, 1e-8)
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], lr: f64) {
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// One step over a network's parameters.
    pub fn step_network(&mut self, net: &mut Sequential, grads: &Gradients, lr: f64) {
        self.step_blocks(net.param_blocks_mut(), grads.blocks(), lr);
    }

    /// One step over parameter blocks laid out back to back in the state.
    pub fn step_blocks<'a, 'b>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut [f64]>,
        grads: impl IntoIterator<Item = &'b [f64]>,
        lr: f64,
    ) {
        self.step += 1;
        let mut offset = 0;
        for (p, g) in params.into_iter().zip(grads) {
            assert_eq!(p.len(), g.len(), "parameter and gradient blocks differ");
            self.update(offset, p, g, lr);
            offset += p.len();
        }
        assert_eq!(offset, self.m.len(), "state does not match parameters");
    }
}

/// One Adam step on a flat parameter vector.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
    assert_eq!(params.len(), state.m.len(), "state does not match parameters");
    state.step += 1;
    state.update(0, params, grads, lr);
}

/// RMSprop without momentum or centering.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub alpha: f64,
    pub eps: f64,
    pub square_avg: Vec<f64>,
}

impl RmsPropState {
    pub const DEFAULT_ALPHA: f64 = 0.99;

    pub fn new(n_params: usize, alpha: f64, eps: f64) -> Self {
        RmsPropState {
            alpha,
            eps,
            square_avg: vec![0.0; n_params],
        }
    }

    pub fn for_network(net: &Sequential, alpha: f64) -> Self {
        Self::new(net.param_count(), alpha, 1e-8)
    }

    fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], lr: f64) {
        let avg = &mut self.square_avg[offset..offset + params.len()];
        for ((p, g), s) in params.iter_mut().zip(grads).zip(avg) {
            *s = self.alpha * *s + (1.0 - self.alpha) * g * g;
            *p -= lr * g / (s.sqrt() + self.eps);
        }
    }

    pub fn step_network(&mut self, net: &mut Sequential, grads: &Gradients, lr: f64) {
        let mut offset = 0;
        for (p, g) in net.param_blocks_mut().into_iter().zip(grads.blocks()) {
            self.update(offset, p, g, lr);
            offset += p.len();
        }
    }
}

pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut RmsPropState, lr: f64) {
    assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
    assert_eq!(params.len(), state.square_avg.len(), "state does not match parameters");
    state.update(0, params, grads, lr);
}
