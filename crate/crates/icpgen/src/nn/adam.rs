//! Adam optimizer with the standard bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::{DenseNetwork, GradientSet};
use crate::{Error, Result};

/// Adam hyperparameters; the defaults are the usual ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// First and second moment estimates, one entry per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    weight_m: Vec<Vec<f64>>,
    weight_v: Vec<Vec<f64>>,
    bias_m: Vec<Vec<f64>>,
    bias_v: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new(net: &DenseNetwork) -> Self {
        let zeros = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            src.iter().map(|p| vec![0.0; p.len()]).collect()
        };
        AdamState {
            weight_m: zeros(&net.weights),
            weight_v: zeros(&net.weights),
            bias_m: zeros(&net.biases),
            bias_v: zeros(&net.biases),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub(super) fn congruent_with(&self, net: &DenseNetwork) -> bool {
        self.weight_m.len() == net.weights.len()
            && self.bias_m.len() == net.biases.len()
            && self
                .weight_m
                .iter()
                .zip(&net.weights)
                .all(|(m, w)| m.len() == w.len())
            && self
                .bias_m
                .iter()
                .zip(&net.biases)
                .all(|(m, b)| m.len() == b.len())
    }

    /// Applies one Adam update in place.
    pub fn step(
        &mut self,
        net: &mut DenseNetwork,
        grads: &GradientSet,
        config: &AdamConfig,
    ) -> Result<()> {
        if !self.congruent_with(net) || !grads.congruent_with(net) {
            return Err(Error::DimensionMismatch(
                "optimizer state or gradients do not match the network".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);

        let update = |params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]| {
            for p in 0..params.len() {
                let g = grads[p];
                m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * g;
                v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * g * g;
                let m_hat = m[p] / bc1;
                let v_hat = v[p] / bc2;
                params[p] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        };

        for l in 0..net.weights.len() {
            update(
                &mut net.weights[l],
                &grads.weight_grads[l],
                &mut self.weight_m[l],
                &mut self.weight_v[l],
            );
            update(
                &mut net.biases[l],
                &grads.bias_grads[l],
                &mut self.bias_m[l],
                &mut self.bias_v[l],
            );
        }
        Ok(())
    }
}
