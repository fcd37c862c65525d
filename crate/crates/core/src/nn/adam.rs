use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use crate::error::{bail, Result};

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params[i]` and `grads[i]` must keep the same
    /// lengths across calls; the first call sizes the moment buffers.
    pub fn step(&mut self, params: Vec<(String, &mut [f64])>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            bail!(Shape, "{} parameter tensors but {} gradients", params.len(), grads.len());
        }
        for ((name, p), g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                bail!(Shape, "{name}: parameter has {} values, gradient {}", p.len(), g.len());
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                bail!(Training, "non-finite gradient in {name}[{i}]");
            }
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != grads.len() || self.first.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
            bail!(Shape, "parameter layout changed between optimizer steps");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((_, p), g), (m, v)) in params.into_iter().zip(grads).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
