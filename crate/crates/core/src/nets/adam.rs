//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero moments for parameters of the given sizes.
    pub fn new(sizes: &[usize], beta1: f64, beta2: f64) -> Self {
        AdamState {
            beta1,
            beta2,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[Tensor], beta1: f64, beta2: f64) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.numel()).collect();
        AdamState::new(&sizes, beta1, beta2)
    }

    /// One update with explicit gradients (`None` counts as zero).
    pub fn update(&mut self, params: &[Tensor], grads: &[Option<Vec<f64>>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::invalid(
                "adam",
                format!("state for {} tensors, got {} params and {} grads", self.m.len(), params.len(), grads.len()),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.numel() != m.len() || g.as_ref().is_some_and(|g| g.len() != m.len()) {
                return Err(Error::shape("adam", p.shape(), &[m.len()]));
            }
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((p, g), m), v) in params.iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let mut data = p.data_mut();
            for i in 0..m.len() {
                let gi = g.as_ref().map_or(0.0, |g| g[i]);
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                data[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }

    /// Update from the gradients accumulated on the tensors.
    pub fn step(&mut self, params: &[Tensor], lr: f64) -> Result<()> {
        let grads: Vec<Option<Vec<f64>>> = params.iter().map(|p| p.grad()).collect();
        self.update(params, &grads, lr)
    }
}
