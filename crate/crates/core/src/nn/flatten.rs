use super::{Layer, LayerConfig, Mode, NnError, Tensor};
use crate::Scalar;

/// `(batch, ...) -> (batch, product(...))`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Layer<T> for Flatten {
    fn config(&self) -> LayerConfig {
        LayerConfig::Flatten
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        self.input_shape = Some(x.shape().to_vec());
        let b = x.batch();
        let rest = x.len().checked_div(b).unwrap_or(0);
        x.clone().reshape(vec![b, rest])
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let shape = self
            .input_shape
            .clone()
            .ok_or(NnError::NoForwardCache("flatten backward"))?;
        grad_out.clone().reshape(shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(vec![input.iter().product()])
    }
}
