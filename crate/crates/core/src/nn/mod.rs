//! Hand-differentiated layers, loss, optimizer, gradient verification and
//! checkpoints. Tensors are channel-last: images are `(batch, height, width,
//! channels)`.

mod activation;
mod adam;
mod batchnorm;
pub mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod flatten;
pub mod gradcheck;
mod layer;
mod loss;
mod pool;
mod sequential;
mod tensor;

pub use activation::{softmax, Relu, Softmax};
pub use adam::{Adam, AdamConfig};
pub use batchnorm::BatchNorm2d;
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use layer::{Layer, LayerConfig, Param};
pub use loss::{argmax_rows, cross_entropy, softmax_cross_entropy};
pub use pool::MaxPool2d;
pub use sequential::Sequential;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {found:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{0} called before forward")]
    NoForwardCache(&'static str),
    #[error("batch normalization needs at least two values per channel in training mode")]
    DegenerateBatch,
    #[error("invalid layer configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Glorot-uniform limit for a weight tensor with the given fans.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
