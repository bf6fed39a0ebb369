use serde::{Deserialize, Serialize};

use super::{BatchNorm2d, Conv2d, Dense, Dropout, Flatten, MaxPool2d, Mode, NnError, Relu, Softmax, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Trainable tensor with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: &'static str, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Self { name, value, grad }
    }
}

/// A differentiable stage. `backward` consumes the cache written by the most
/// recent `forward` and overwrites parameter gradients.
pub trait Layer<T: Scalar>: Send {
    fn config(&self) -> LayerConfig;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError>;

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError>;

    /// Per-sample output shape for a per-sample input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError>;

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    /// Non-trainable state carried into inference (batchnorm running stats).
    fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        Vec::new()
    }

    /// True where the layer has no derivative at input coordinate `index`
    /// for a central difference of half-width `step`.
    fn nondifferentiable_at(&self, _input: &Tensor<T>, _index: usize, _step: T) -> bool {
        false
    }
}

/// Serializable layer description; the topology block of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerConfig {
    Dense {
        inputs: usize,
        units: usize,
    },
    Relu,
    Softmax,
    Dropout {
        rate: f64,
    },
    Conv2d {
        kernel: [usize; 2],
        in_channels: usize,
        filters: usize,
    },
    MaxPool2d {
        pool: [usize; 2],
        strides: [usize; 2],
    },
    BatchNorm2d {
        channels: usize,
        eps: f64,
        momentum: f64,
    },
    Flatten,
}

impl LayerConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerConfig::Dense { .. } => "dense",
            LayerConfig::Relu => "relu",
            LayerConfig::Softmax => "softmax",
            LayerConfig::Dropout { .. } => "dropout",
            LayerConfig::Conv2d { .. } => "conv2d",
            LayerConfig::MaxPool2d { .. } => "maxpool2d",
            LayerConfig::BatchNorm2d { .. } => "batchnorm2d",
            LayerConfig::Flatten => "flatten",
        }
    }

    /// Instantiates the layer. `init` draws weights; `stream` seeds any
    /// train-time randomness owned by the layer.
    pub fn build<T: Scalar>(&self, init: &mut SeededRng, stream: SeededRng) -> Result<Box<dyn Layer<T>>, NnError> {
        Ok(match *self {
            LayerConfig::Dense { inputs, units } => Box::new(Dense::new(inputs, units, init)?),
            LayerConfig::Relu => Box::new(Relu::new()),
            LayerConfig::Softmax => Box::new(Softmax::new()),
            LayerConfig::Dropout { rate } => Box::new(Dropout::new(rate, stream)?),
            LayerConfig::Conv2d {
                kernel,
                in_channels,
                filters,
            } => Box::new(Conv2d::new(kernel, in_channels, filters, init)?),
            LayerConfig::MaxPool2d { pool, strides } => Box::new(MaxPool2d::new(pool, strides)?),
            LayerConfig::BatchNorm2d {
                channels,
                eps,
                momentum,
            } => Box::new(BatchNorm2d::new(channels, eps, momentum)?),
            LayerConfig::Flatten => Box::new(Flatten::new()),
        })
    }
}
