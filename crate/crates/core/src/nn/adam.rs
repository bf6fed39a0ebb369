use serde::{Deserialize, Serialize};

use super::Param;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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
            epsilon: 1e-7,
        }
    }
}

/// Adaptive-moment optimizer with bias-corrected first and second moments:
/// `w -= lr * m_hat / (sqrt(v_hat) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.first, &self.second)
    }

    /// Rebuilds optimizer state, e.g. from a checkpoint.
    pub fn from_state(config: AdamConfig, step: u64, first: Vec<Vec<T>>, second: Vec<Vec<T>>) -> Self {
        Self {
            config,
            step,
            first,
            second,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param<T>]) {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = T::lit(1.0 - c.beta1.powi(t));
        let bc2 = T::lit(1.0 - c.beta2.powi(t));
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let (lr, eps) = (T::lit(c.learning_rate), T::lit(c.epsilon));
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn scalar_param(w: f64) -> Param<f64> {
        Param::new("w", Tensor::filled(vec![1], w))
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Param::new("w", Tensor::from_fn(vec![5], |i| i as f64));
        let before = p.value.clone();
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut [&mut p]);
        }
        assert_eq!(p.value, before);
    }

    #[test]
    fn first_step_hand_computed() {
        let mut p = scalar_param(0.0);
        p.grad.data_mut()[0] = 1.0;
        let mut adam = Adam::new(AdamConfig {
            learning_rate: 0.001,
            ..Default::default()
        });
        adam.step(&mut [&mut p]);
        let want = -0.001 / (1.0 + 1e-7);
        assert!((p.value.data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn minimizes_quadratic_bowl() {
        let mut p = scalar_param(1.0);
        let mut adam = Adam::new(AdamConfig {
            learning_rate: 0.01,
            ..Default::default()
        });
        for _ in 0..1000 {
            let w = p.value.data()[0];
            p.grad.data_mut()[0] = 2.0 * w;
            adam.step(&mut [&mut p]);
        }
        assert!(p.value.data()[0].abs() < 0.01, "{}", p.value.data()[0]);
    }

    proptest! {
        #[test]
        fn per_step_change_is_bounded(seed: u64, steps in 1usize..50, scale in 0.001f64..1000.0) {
            let c = AdamConfig { learning_rate: 0.01, ..Default::default() };
            let mut rng = SeededRng::new(seed);
            let mut p = scalar_param(0.0);
            let mut adam = Adam::new(c);
            for t in 1..=steps {
                p.grad.data_mut()[0] = rng.normal() * scale;
                let before = p.value.data()[0];
                adam.step(&mut [&mut p]);
                let delta = (p.value.data()[0] - before).abs();
                // Cauchy-Schwarz bound on |m_hat| / sqrt(v_hat)
                let ratio = c.beta1 * c.beta1 / c.beta2;
                let bound = c.learning_rate * (1.0 - c.beta1) / (1.0 - c.beta2).sqrt()
                    / (1.0 - ratio).sqrt()
                    * (1.0 - c.beta2.powi(t as i32)).sqrt()
                    / (1.0 - c.beta1.powi(t as i32));
                prop_assert!(delta <= bound * (1.0 + 1e-9), "step {} delta {} bound {}", t, delta, bound);
            }
        }
    }
}
