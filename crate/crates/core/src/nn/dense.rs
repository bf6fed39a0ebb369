use super::{glorot_limit, Layer, LayerConfig, Mode, NnError, Param, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Fully connected layer `y = x W + b` over `(batch, inputs)` tensors.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    inputs: usize,
    units: usize,
    weight: Param<T>,
    bias: Param<T>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(inputs: usize, units: usize, init: &mut SeededRng) -> Result<Self, NnError> {
        if inputs == 0 || units == 0 {
            return Err(NnError::InvalidConfig("dense layer needs positive sizes".into()));
        }
        let limit = glorot_limit(inputs, units);
        let w = Tensor::from_fn(vec![inputs, units], |_| T::lit(init.uniform_range(-limit, limit)));
        Ok(Self::from_parts(w, Tensor::zeros(vec![units])))
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        let (inputs, units) = (weight.shape()[0], weight.shape()[1]);
        Self {
            inputs,
            units,
            weight: Param::new("kernel", weight),
            bias: Param::new("bias", bias),
            cache: None,
        }
    }
}

impl<T: Scalar> Layer<T> for Dense<T> {
    fn config(&self) -> LayerConfig {
        LayerConfig::Dense {
            inputs: self.inputs,
            units: self.units,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        let b = x.batch();
        x.expect_shape("dense input", &[b, self.inputs])?;
        let mut y = Vec::with_capacity(b * self.units);
        for _ in 0..b {
            y.extend_from_slice(self.bias.value.data());
        }
        T::gemm(
            b,
            self.inputs,
            self.units,
            x.data(),
            false,
            self.weight.value.data(),
            false,
            T::one(),
            &mut y,
        );
        self.cache = Some(x.clone());
        Tensor::new(vec![b, self.units], y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = self.cache.as_ref().ok_or(NnError::NoForwardCache("dense backward"))?;
        let b = x.batch();
        grad_out.expect_shape("dense gradient", &[b, self.units])?;
        let g = grad_out.data();
        T::gemm(
            self.inputs,
            b,
            self.units,
            x.data(),
            true,
            g,
            false,
            T::zero(),
            self.weight.grad.data_mut(),
        );
        let db = self.bias.grad.data_mut();
        db.fill(T::zero());
        for row in g.chunks_exact(self.units) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dx = vec![T::zero(); b * self.inputs];
        T::gemm(
            b,
            self.units,
            self.inputs,
            g,
            false,
            self.weight.value.data(),
            true,
            T::zero(),
            &mut dx,
        );
        Tensor::new(vec![b, self.inputs], dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        if input != [self.inputs] {
            return Err(NnError::Shape {
                context: "dense input",
                expected: vec![self.inputs],
                found: input.to_vec(),
            });
        }
        Ok(vec![self.units])
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
