use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Running mean of squared gradients, one accumulator per parameter.
///
/// `a <- rho * a + (1 - rho) * g^2`, then `p <- p - lr * g / sqrt(a + eps)`.
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    accum: Gradients,
}

impl RmsProp {
    pub fn new(network: &Network, config: RmsPropConfig) -> Self {
        RmsProp {
            config,
            accum: Gradients::zeros_like(network),
        }
    }

    pub fn accumulators(&self) -> &Gradients {
        &self.accum
    }

    pub fn step(&mut self, network: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != network.layers.len() || self.accum.layers.len() != network.layers.len() {
            return Err(Error::InvalidArgument("gradient/optimizer depth mismatch".into()));
        }
        let RmsPropConfig {
            learning_rate: lr,
            rho,
            epsilon: eps,
        } = self.config;
        for ((layer, g), a) in network.layers.iter_mut().zip(&grads.layers).zip(&mut self.accum.layers) {
            if layer.weights.dim() != g.weights.dim()
                || layer.bias.dim() != g.bias.dim()
                || a.weights.dim() != g.weights.dim()
            {
                return Err(Error::InvalidArgument("gradient shape mismatch".into()));
            }
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut a.weights)
                .for_each(|p, &g, a| update(p, g, a, lr, rho, eps));
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut a.bias)
                .for_each(|p, &g, a| update(p, g, a, lr, rho, eps));
        }
        Ok(())
    }
}

#[inline]
fn update(p: &mut f64, g: f64, a: &mut f64, lr: f64, rho: f64, eps: f64) {
    *a = rho * *a + (1.0 - rho) * g * g;
    *p -= lr * g / (*a + eps).sqrt();
}
