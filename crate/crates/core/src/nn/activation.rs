use super::{Layer, LayerConfig, Mode, NnError, Tensor};
use crate::Scalar;

/// `max(x, 0)`. The gradient at exactly zero is taken as zero.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Layer<T> for Relu {
    fn config(&self) -> LayerConfig {
        LayerConfig::Relu
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        let mask: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
        // NaN passes through so divergence stays visible downstream
        let y = x.map(|v| if v < T::zero() { T::zero() } else { v });
        self.mask = Some((x.shape().to_vec(), mask));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let (shape, mask) = self.mask.as_ref().ok_or(NnError::NoForwardCache("relu backward"))?;
        grad_out.expect_shape("relu gradient", shape)?;
        let data = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g } else { T::zero() })
            .collect();
        Tensor::new(shape.clone(), data)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(input.to_vec())
    }

    fn nondifferentiable_at(&self, input: &Tensor<T>, index: usize, step: T) -> bool {
        input.data()[index].abs() <= step
    }
}

/// Row-wise softmax over the last axis of a `(batch, classes)` tensor.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let classes = x.shape().last().copied().unwrap_or(1).max(1);
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(classes) {
        let peak = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - peak).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(x.shape().to_vec(), out).expect("softmax preserves shape")
}

#[derive(Debug, Clone)]
pub struct Softmax<T> {
    output: Option<Tensor<T>>,
}

impl<T> Softmax<T> {
    pub fn new() -> Self {
        Self { output: None }
    }
}

impl<T> Default for Softmax<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Layer<T> for Softmax<T> {
    fn config(&self) -> LayerConfig {
        LayerConfig::Softmax
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        if x.rank() != 2 {
            return Err(NnError::Shape {
                context: "softmax input",
                expected: vec![x.batch(), x.len() / x.batch().max(1)],
                found: x.shape().to_vec(),
            });
        }
        let y = softmax(x);
        self.output = Some(y.clone());
        Ok(y)
    }

    /// Jacobian-vector product `y * (g - sum(g * y))` per row.
    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let y = self
            .output
            .as_ref()
            .ok_or(NnError::NoForwardCache("softmax backward"))?;
        grad_out.expect_shape("softmax gradient", y.shape())?;
        let classes = y.shape()[1];
        let mut dx = Vec::with_capacity(y.len());
        for (yr, gr) in y
            .data()
            .chunks_exact(classes)
            .zip(grad_out.data().chunks_exact(classes))
        {
            let dot = yr.iter().zip(gr).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            dx.extend(yr.iter().zip(gr).map(|(&a, &b)| a * (b - dot)));
        }
        Tensor::new(y.shape().to_vec(), dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(input.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn relu_definition() {
        let mut r = Relu::new();
        let x = Tensor::new(vec![1, 2], vec![-1.0f64, 2.0]).unwrap();
        assert_eq!(r.forward(&x, Mode::Train).unwrap().data(), &[0.0, 2.0]);
        let g = r.backward(&Tensor::filled(vec![1, 2], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 1.0]);
    }

    #[test]
    fn relu_all_negative_and_zero_tie() {
        let mut r = Relu::new();
        let x = Tensor::new(vec![1, 3], vec![-3.0f64, -0.1, 0.0]).unwrap();
        assert!(r.forward(&x, Mode::Train).unwrap().data().iter().all(|&v| v == 0.0));
        let g = r.backward(&Tensor::filled(vec![1, 3], 5.0)).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_cases() {
        let y = softmax(&Tensor::new(vec![1, 2], vec![0.0f64, 0.0]).unwrap());
        assert_eq!(y.data(), &[0.5, 0.5]);
        let y = softmax(&Tensor::new(vec![1, 2], vec![1000.0f32, 0.0]).unwrap());
        assert_eq!(y.data(), &[1.0, 0.0]);
        let mut rng = SeededRng::new(2);
        let x = Tensor::from_fn(vec![16, 8], |_| (rng.normal() * 10.0) as f32);
        let y = softmax(&x);
        for row in y.data().chunks(8) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
