use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyper-parameters. The update itself lives in [`super::Mlp::adam_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, lr: f64) -> Self {
        self.learning_rate = lr;
        self
    }

    /// A learning rate of exactly zero is accepted and freezes the parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("adam.learning_rate", "must be finite and >= 0"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return Err(Error::config("adam.beta1", "must lie in (0, 1)"));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::config("adam.beta2", "must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam.epsilon", "must be > 0"));
        }
        Ok(())
    }
}
