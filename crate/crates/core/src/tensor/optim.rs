use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Parameter, Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct Moments<T: Real> {
    first: Tensor<T>,
    second: Tensor<T>,
}

/// Adam with bias correction. Moment buffers are keyed by parameter name and
/// persist across steps.
pub struct Adam<T: Real = f32> {
    config: AdamConfig,
    step: u64,
    moments: HashMap<String, Moments<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates every trainable parameter that holds a gradient. Frozen
    /// parameters are never written.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter<T>>) -> Result<()> {
        let mut pending: Vec<&'a mut Parameter<T>> =
            params.into_iter().filter(|p| p.trainable() && p.has_grad()).collect();
        if pending.is_empty() {
            return Err(Error::Optimizer(
                "step called but no trainable parameter has a recorded gradient".into(),
            ));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let one = T::one();
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        let (bias1, bias2) = (T::from_f64_lossy(bias1), T::from_f64_lossy(bias2));

        for p in pending.iter_mut() {
            let shape = p.value().shape().to_vec();
            let m = self.moments.entry(p.name().to_string()).or_insert_with(|| Moments {
                first: Tensor::zeros(&shape),
                second: Tensor::zeros(&shape),
            });
            if m.first.shape() != shape.as_slice() {
                return Err(Error::shape(format!(
                    "optimizer state for {} has shape {:?}, parameter is {:?}",
                    p.name(),
                    m.first.shape(),
                    shape
                )));
            }
            let grad = p.grad().data().to_vec();
            let value = p.value_mut().data_mut();
            let (first, second) = (m.first.data_mut(), m.second.data_mut());
            for i in 0..grad.len() {
                let g = grad[i];
                first[i] = b1 * first[i] + (one - b1) * g;
                second[i] = b2 * second[i] + (one - b2) * g * g;
                let m_hat = first[i] / bias1;
                let v_hat = second[i] / bias2;
                value[i] = value[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
