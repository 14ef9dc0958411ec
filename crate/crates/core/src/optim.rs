//! Adam with bias correction, operating on named parameter tensors.

use std::collections::HashMap;

use crate::error::TensorError;
use crate::tensor::Tensor;

pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(lr: f64) -> AdamState {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One optimizer step over all named parameters. Consumes the gradients
    /// accumulated by the last backward pass; a missing gradient counts as zero.
    pub fn step(&mut self, params: &[(String, Tensor)]) -> Result<(), TensorError> {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for (name, p) in params {
            let n = p.len();
            let grad = p.take_grad().unwrap_or_else(|| vec![0.0; n]);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(TensorError::NonFiniteGrad { name: name.clone() });
            }
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            let mut data = p.data();
            for i in 0..n {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set_data(&data);
        }
        Ok(())
    }
}
