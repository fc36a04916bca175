use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for an ordered list of parameters. The order passed
/// to [`AdamState::step`] must be the same on every call.
#[derive(Debug, Clone)]
pub struct AdamState<F = f32> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update from each tensor's accumulated gradient.
    /// Tensors without a gradient are left alone.
    pub fn step(&mut self, params: &mut [&mut Tensor<F>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![F::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed between Adam steps");
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr_t = F::of(c.lr * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        let (b1, b2, eps) = (F::of(c.beta1), F::of(c.beta2), F::of(c.eps));
        let one = F::one();
        // eps is applied to the bias-corrected second moment, as in the original.
        let eps_hat = eps * F::of((1.0 - c.beta2.powi(t)).sqrt());
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.grad().is_none() {
                continue;
            }
            let (values, grad) = p.split_mut();
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                values[i] -= lr_t * m[i] / (v[i].sqrt() + eps_hat);
            }
        }
    }
}
