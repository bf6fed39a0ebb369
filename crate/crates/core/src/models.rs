//! The DNN and CNN classifiers and the six-experiment registry.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::{LayerConfig, Mode, NnError, Sequential, Tensor};
use crate::Scalar;

pub const DROPOUT_RATE: f64 = 0.3;
pub const BN_EPS: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dnn,
    Cnn,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(ModelKind::Dnn),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(format!("unknown model kind {other:?} (expected dnn or cnn)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dnn => "dnn",
            ModelKind::Cnn => "cnn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `(frames, n_mfcc)`; the CNN appends a channel axis of 1.
    pub input_shape: [usize; 2],
    pub num_classes: usize,
    pub extra_dropout: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, input_shape: [usize; 2]) -> Self {
        Self {
            kind,
            input_shape,
            num_classes: 8,
            extra_dropout: false,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_shape.contains(&0) {
            return Err(NnError::InvalidConfig("input shape must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(NnError::InvalidConfig("need at least two classes".into()));
        }
        Ok(())
    }

    /// Per-sample tensor shape fed to the network.
    pub fn tensor_shape(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::Dnn => self.input_shape.to_vec(),
            ModelKind::Cnn => vec![self.input_shape[0], self.input_shape[1], 1],
        }
    }

    pub fn layers(&self) -> Result<Vec<LayerConfig>, NnError> {
        self.validate()?;
        Ok(match self.kind {
            ModelKind::Dnn => dnn_layers(self),
            ModelKind::Cnn => cnn_layers(self)?,
        })
    }
}

fn dnn_layers(spec: &ModelSpec) -> Vec<LayerConfig> {
    let inputs = spec.input_shape[0] * spec.input_shape[1];
    let mut l = vec![
        LayerConfig::Flatten,
        LayerConfig::Dense { inputs, units: 512 },
        LayerConfig::Relu,
        LayerConfig::Dense {
            inputs: 512,
            units: 256,
        },
        LayerConfig::Relu,
        LayerConfig::Dropout { rate: DROPOUT_RATE },
        LayerConfig::Dense { inputs: 256, units: 64 },
        LayerConfig::Relu,
    ];
    if spec.extra_dropout {
        l.push(LayerConfig::Dropout { rate: DROPOUT_RATE });
    }
    l.push(LayerConfig::Dense {
        inputs: 64,
        units: spec.num_classes,
    });
    l.push(LayerConfig::Softmax);
    l
}

/// Spatial size after each CNN pooling stage, starting with the input.
pub fn cnn_spatial_trace(input: [usize; 2]) -> Vec<[usize; 2]> {
    let mut trace = vec![input];
    for stride in [2, 2, 2] {
        let [h, w] = *trace.last().unwrap();
        trace.push([h.div_ceil(stride), w.div_ceil(stride)]);
    }
    trace
}

fn cnn_layers(spec: &ModelSpec) -> Result<Vec<LayerConfig>, NnError> {
    let bn = |channels| LayerConfig::BatchNorm2d {
        channels,
        eps: BN_EPS,
        momentum: BN_MOMENTUM,
    };
    let stages = [
        ([3, 3], [3, 3], [2, 2]),
        ([3, 3], [3, 3], [2, 2]),
        ([2, 2], [2, 2], [2, 2]),
    ];
    let mut l = Vec::new();
    let mut in_channels = 1;
    for (kernel, pool, strides) in stages {
        l.push(LayerConfig::Conv2d {
            kernel,
            in_channels,
            filters: 32,
        });
        l.push(LayerConfig::Relu);
        l.push(LayerConfig::MaxPool2d { pool, strides });
        l.push(bn(32));
        in_channels = 32;
    }
    let [h, w] = *cnn_spatial_trace(spec.input_shape).last().unwrap();
    l.push(LayerConfig::Flatten);
    l.push(LayerConfig::Dense {
        inputs: h * w * 32,
        units: 64,
    });
    l.push(LayerConfig::Relu);
    if spec.extra_dropout {
        l.push(LayerConfig::Dropout { rate: DROPOUT_RATE });
    }
    l.push(LayerConfig::Dense {
        inputs: 64,
        units: spec.num_classes,
    });
    l.push(LayerConfig::Softmax);
    Ok(l)
}

/// A built classifier together with the spec it came from.
#[derive(Debug)]
pub struct Model<T: Scalar> {
    pub spec: ModelSpec,
    pub net: Sequential<T>,
}

impl<T: Scalar> Model<T> {
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self, NnError> {
        let net = Sequential::from_configs(spec.tensor_shape(), &spec.layers()?, seed)?;
        Ok(Self { spec, net })
    }

    /// Reshapes `(B, frames, n_mfcc)` data to the network's input layout.
    pub fn prepare(&self, x: Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut shape = vec![x.batch()];
        shape.extend(self.spec.tensor_shape());
        x.reshape(shape)
    }

    pub fn predict_proba(&mut self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.net.forward(x, Mode::Inference)
    }
}

pub fn build_dnn<T: Scalar>(spec: ModelSpec, seed: u64) -> Result<Model<T>, NnError> {
    if spec.kind != ModelKind::Dnn {
        return Err(NnError::InvalidConfig("build_dnn needs a dnn spec".into()));
    }
    Model::build(spec, seed)
}

pub fn build_cnn<T: Scalar>(spec: ModelSpec, seed: u64) -> Result<Model<T>, NnError> {
    if spec.kind != ModelKind::Cnn {
        return Err(NnError::InvalidConfig("build_cnn needs a cnn spec".into()));
    }
    Model::build(spec, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Randomization {
    RandomSplit,
    StratifiedKfold,
}

/// One row of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub number: u32,
    pub kind: ModelKind,
    pub input_shape: [usize; 2],
    pub total_samples: usize,
    pub randomization: Randomization,
    pub epochs: usize,
    pub ratios: [f64; 3],
    /// Segment length in milliseconds.
    pub sample_length_ms: u32,
    pub extra_dropout: bool,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn model_spec(&self, num_classes: usize) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            input_shape: self.input_shape,
            num_classes,
            extra_dropout: self.extra_dropout,
        }
    }

    /// Segments per 30 s clip implied by the sample length.
    pub fn segments_per_clip(&self) -> usize {
        (30_000 / self.sample_length_ms) as usize
    }
}

pub fn experiment(number: u32, kind: ModelKind) -> Result<ExperimentSpec, Error> {
    use Randomization::*;
    let (input_shape, total_samples, randomization, epochs, ratios, sample_length_ms) = match number {
        1 => ([2, 13], 1_056_000, RandomSplit, 30, [7.0, 1.0, 2.0], 25),
        2 => ([2, 13], 200_000, RandomSplit, 30, [5.0, 2.5, 2.5], 25),
        3 => ([44, 13], 1_056_000, StratifiedKfold, 30, [7.0, 1.0, 2.0], 1000),
        4 => ([44, 13], 1_056_000, StratifiedKfold, 100, [7.0, 1.0, 2.0], 1000),
        5 | 6 => ([44, 13], 26_400, StratifiedKfold, 30, [8.0, 1.0, 1.0], 1000),
        n => return Err(Error::UnknownExperiment(n)),
    };
    Ok(ExperimentSpec {
        number,
        kind,
        input_shape,
        total_samples,
        randomization,
        epochs,
        ratios,
        sample_length_ms,
        extra_dropout: number == 6,
        seed: 0,
    })
}

/// All twelve (experiment, model) rows.
pub fn registry() -> Vec<ExperimentSpec> {
    (1..=6)
        .flat_map(|n| [ModelKind::Dnn, ModelKind::Cnn].map(|k| experiment(n, k).unwrap()))
        .collect()
}
