use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// Bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::invalid("lr", format!("must be > 0, got {lr}")));
        }
        if grads.layers.len() != net.layers.len() || self.m.layers.len() != net.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: net.layers.len(),
                got: grads.layers.len(),
            });
        }
        for (k, (g, l)) in grads.layers.iter().zip(&net.layers).enumerate() {
            if g.weights.len() != l.weights.len() || g.biases.len() != l.biases.len() {
                return Err(Error::ShapeMismatch {
                    expected: l.weights.len() + l.biases.len(),
                    got: g.weights.len() + g.biases.len(),
                });
            }
            if !g.weights.iter().chain(&g.biases).all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient { block: k });
            }
        }

        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in net
            .params_mut()
            .zip(grads.values())
            .zip(self.m.values_mut())
            .zip(self.v.values_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
