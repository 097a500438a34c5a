//! Plain SGD with optional classical momentum.

use crate::error::{Error, Result};

/// theta - lr * gradient, elementwise and exact.
pub fn sgd_step(theta: &mut [f64], gradient: &[f64], lr: f64) -> Result<()> {
    if theta.len() != gradient.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: gradient.len(),
        });
    }
    for (t, g) in theta.iter_mut().zip(gradient.iter()) {
        *t -= lr * g;
    }
    Ok(())
}

/// SGD state with classical momentum: v <- m*v + g; theta <- theta - lr*v.
/// momentum = 0 reduces each step to `sgd_step`.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, param_count: usize) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {lr}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0,1), got {momentum}"
            )));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocity: vec![0.0; param_count],
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, theta: &mut [f64], gradient: &[f64]) -> Result<()> {
        if theta.len() != self.velocity.len() || gradient.len() != self.velocity.len() {
            return Err(Error::DimensionMismatch {
                expected: self.velocity.len(),
                got: theta.len().min(gradient.len()),
            });
        }
        for ((v, g), t) in self
            .velocity
            .iter_mut()
            .zip(gradient.iter())
            .zip(theta.iter_mut())
        {
            *v = self.momentum * *v + g;
            *t -= self.lr * *v;
        }
        Ok(())
    }

    /// Drop accumulated velocity (used when parameters are replaced wholesale,
    /// e.g. after a weight transfer).
    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
    }
}
