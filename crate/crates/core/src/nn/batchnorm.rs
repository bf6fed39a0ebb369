use super::{Layer, LayerConfig, Mode, NnError, Param, Tensor};
use crate::Scalar;

/// Per-channel batch normalization over every axis but the last.
///
/// Training normalizes by the biased batch statistics and folds them into the
/// running estimates as `running = momentum * running + (1 - momentum) * batch`;
/// inference normalizes by the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    channels: usize,
    eps: f64,
    momentum: f64,
    gamma: Param<T>,
    beta: Param<T>,
    running_mean: Tensor<T>,
    running_var: Tensor<T>,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    shape: Vec<usize>,
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Result<Self, NnError> {
        if channels == 0 || !(eps > 0.0) || !(0.0..=1.0).contains(&momentum) {
            return Err(NnError::InvalidConfig(
                "batchnorm needs channels > 0, eps > 0, momentum in [0, 1]".into(),
            ));
        }
        Ok(Self {
            channels,
            eps,
            momentum,
            gamma: Param::new("gamma", Tensor::filled(vec![channels], T::one())),
            beta: Param::new("beta", Tensor::zeros(vec![channels])),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::filled(vec![channels], T::one()),
            cache: None,
        })
    }

    pub fn running_mean(&self) -> &Tensor<T> {
        &self.running_mean
    }

    pub fn running_var(&self) -> &Tensor<T> {
        &self.running_var
    }
}

impl<T: Scalar> Layer<T> for BatchNorm2d<T> {
    fn config(&self) -> LayerConfig {
        LayerConfig::BatchNorm2d {
            channels: self.channels,
            eps: self.eps,
            momentum: self.momentum,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        let c = self.channels;
        if x.rank() < 2 || x.shape().last() != Some(&c) {
            return Err(NnError::Shape {
                context: "batchnorm input (..., channels)",
                expected: vec![c],
                found: x.shape().to_vec(),
            });
        }
        let count = x.len() / c;
        let eps = T::lit(self.eps);
        let (mean, var) = match mode {
            Mode::Train => {
                if count < 2 {
                    return Err(NnError::DegenerateBatch);
                }
                let n = T::from_usize(count).unwrap();
                let mut mean = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![T::zero(); c];
                for row in x.data().chunks_exact(c) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n);
                let keep = T::lit(self.momentum);
                let take = T::lit(1.0 - self.momentum);
                for ch in 0..c {
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = keep * *rm + take * mean[ch];
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = keep * *rv + take * var[ch];
                }
                (mean, var)
            }
            Mode::Inference => (self.running_mean.data().to_vec(), self.running_var.data().to_vec()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        let (gamma, beta) = (self.gamma.value.data(), self.beta.value.data());
        for row in x.data().chunks_exact(c) {
            for ch in 0..c {
                let h = (row[ch] - mean[ch]) * inv_std[ch];
                x_hat.push(h);
                y.push(gamma[ch] * h + beta[ch]);
            }
        }
        self.cache = Some(BnCache {
            shape: x.shape().to_vec(),
            x_hat,
            inv_std,
            mode,
        });
        Tensor::new(x.shape().to_vec(), y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self
            .cache
            .as_ref()
            .ok_or(NnError::NoForwardCache("batchnorm backward"))?;
        grad_out.expect_shape("batchnorm gradient", &cache.shape)?;
        let c = self.channels;
        let g = grad_out.data();
        let mut sum_g = vec![T::zero(); c];
        let mut sum_gx = vec![T::zero(); c];
        for (gr, hr) in g.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                sum_g[ch] += gr[ch];
                sum_gx[ch] += gr[ch] * hr[ch];
            }
        }
        self.beta.grad.data_mut().copy_from_slice(&sum_g);
        self.gamma.grad.data_mut().copy_from_slice(&sum_gx);

        let gamma = self.gamma.value.data();
        let mut dx = Vec::with_capacity(g.len());
        match cache.mode {
            Mode::Train => {
                let n = T::from_usize(g.len() / c).unwrap();
                for (gr, hr) in g.chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
                    for ch in 0..c {
                        let scale = gamma[ch] * cache.inv_std[ch] / n;
                        dx.push(scale * (n * gr[ch] - sum_g[ch] - hr[ch] * sum_gx[ch]));
                    }
                }
            }
            Mode::Inference => {
                for gr in g.chunks_exact(c) {
                    for ch in 0..c {
                        dx.push(gr[ch] * gamma[ch] * cache.inv_std[ch]);
                    }
                }
            }
        }
        Tensor::new(cache.shape.clone(), dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        if input.last() != Some(&self.channels) {
            return Err(NnError::Shape {
                context: "batchnorm input (..., channels)",
                expected: vec![self.channels],
                found: input.to_vec(),
            });
        }
        Ok(input.to_vec())
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![("running_mean", &self.running_mean), ("running_var", &self.running_var)]
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        vec![
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm2d::<f64>::new(3, 1e-3, 0.99).unwrap();
        let mut rng = SeededRng::new(4);
        let x = Tensor::from_fn(vec![8, 5, 4, 3], |i| rng.normal() * 3.0 + (i % 3) as f64 * 10.0);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            // eps pulls the variance slightly below one
            assert!((var - 1.0).abs() < 1e-3, "{var}");
        }
    }

    #[test]
    fn constant_channel_yields_beta() {
        let mut bn = BatchNorm2d::<f64>::new(1, 1e-3, 0.99).unwrap();
        bn.beta.value.data_mut()[0] = 0.25;
        let y = bn.forward(&Tensor::filled(vec![4, 2, 2, 1], 3.0), Mode::Train).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn running_statistics_update() {
        let mut bn = BatchNorm2d::<f64>::new(1, 1e-3, 0.99).unwrap();
        let x = Tensor::new(vec![2, 1, 1, 1], vec![1.0, 3.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean().data()[0] - 0.02).abs() < 1e-12);
        assert!((bn.running_var().data()[0] - (0.99 + 0.01 * 1.0)).abs() < 1e-12);
        // inference uses the running estimates and leaves them alone
        let before = bn.running_mean().clone();
        let y = bn.forward(&x, Mode::Inference).unwrap();
        assert_eq!(bn.running_mean(), &before);
        let want = (1.0 - 0.02) / (1.0f64 + 1e-3).sqrt();
        assert!((y.data()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn single_value_batch_is_rejected_in_training() {
        let mut bn = BatchNorm2d::<f64>::new(2, 1e-3, 0.99).unwrap();
        let x = Tensor::zeros(vec![1, 1, 1, 2]);
        assert!(matches!(bn.forward(&x, Mode::Train), Err(NnError::DegenerateBatch)));
        assert!(bn.forward(&x, Mode::Inference).is_ok());
    }
}
