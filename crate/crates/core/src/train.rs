//! Mini-batch training, evaluation, and clip-level prediction.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{resample, AudioClip};
use crate::dataset::{segment_clip, DatasetError, FeatureDataset, SplitAssignment};
use crate::dsp::{DspConfig, MfccExtractor};
use crate::models::{ExperimentSpec, Model, ModelSpec};
use crate::nn::{argmax_rows, softmax_cross_entropy, Adam, AdamConfig, Mode, NnError, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Rows per inference batch during evaluation.
pub const EVAL_BATCH: usize = 256;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("no samples to score")]
    NoSamples,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset shape {found:?} does not fit model input {expected:?}")]
    ShapeMismatch { expected: [usize; 2], found: [usize; 2] },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Fraction of predictions equal to their label.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, TrainError> {
    if predictions.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(TrainError::NoSamples);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            seed: 0,
            optimizer: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_loss: f64,
    pub valid_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelSpec,
    pub experiment: Option<ExperimentSpec>,
    pub config: TrainConfig,
    pub split_sizes: [usize; 3],
    pub epochs: Vec<EpochRecord>,
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// `test_loss * 100`; the percentage-style loss figure some tables use.
    pub test_loss_x100: f64,
}

impl TrainReport {
    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,valid_loss,valid_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_loss, e.train_accuracy, e.valid_loss, e.valid_accuracy
            ));
        }
        out
    }
}

fn check_shape<T: Scalar>(model: &Model<T>, ds: &FeatureDataset) -> Result<(), TrainError> {
    let found = [ds.frames, ds.n_mfcc];
    if found != model.spec.input_shape {
        return Err(TrainError::ShapeMismatch {
            expected: model.spec.input_shape,
            found,
        });
    }
    Ok(())
}

/// Stacks the selected samples into a model-ready batch.
pub fn gather<T: Scalar>(
    model: &Model<T>,
    ds: &FeatureDataset,
    indices: &[u32],
) -> Result<(Tensor<T>, Vec<usize>), TrainError> {
    let per = ds.frames * ds.n_mfcc;
    let mut data = Vec::with_capacity(indices.len() * per);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = ds.samples.get(i as usize).ok_or(DatasetError::InvalidSplit(format!(
            "index {i} out of range for {} samples",
            ds.len()
        )))?;
        data.extend(s.values.iter().map(|&v| T::lit(v as f64)));
        labels.push(s.label as usize);
    }
    let x = Tensor::new(vec![indices.len(), ds.frames, ds.n_mfcc], data)?;
    Ok((model.prepare(x)?, labels))
}

/// Mean cross-entropy and accuracy over `indices`, in inference mode.
pub fn evaluate<T: Scalar>(
    model: &mut Model<T>,
    ds: &FeatureDataset,
    indices: &[u32],
) -> Result<(f64, f64), TrainError> {
    if indices.is_empty() {
        return Err(TrainError::NoSamples);
    }
    check_shape(model, ds)?;
    let mut loss_sum = 0.0;
    let mut preds = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let (x, y) = gather(model, ds, chunk)?;
        let logits = model.net.logits(&x, Mode::Inference)?;
        let (loss, probs, _) = softmax_cross_entropy(&logits, &y)?;
        loss_sum += loss.to_f64_lossy() * chunk.len() as f64;
        preds.extend(argmax_rows(&probs));
        labels.extend(y);
    }
    Ok((loss_sum / indices.len() as f64, accuracy(&preds, &labels)?))
}

/// Trains with a fresh optimizer; see [`train_with`].
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    ds: &FeatureDataset,
    split: &SplitAssignment,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    let mut opt = Adam::new(cfg.optimizer);
    train_with(model, ds, split, cfg, &mut opt)
}

/// Runs `cfg.epochs` passes over the training part, then scores the test part.
/// Each epoch shuffles the training indices with a stream derived from
/// `cfg.seed`, so identical inputs give identical reports.
pub fn train_with<T: Scalar>(
    model: &mut Model<T>,
    ds: &FeatureDataset,
    split: &SplitAssignment,
    cfg: &TrainConfig,
    opt: &mut Adam<T>,
) -> Result<TrainReport, TrainError> {
    if cfg.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch size must be at least 1".into()));
    }
    split.validate(ds.len())?;
    check_shape(model, ds)?;
    for (name, part) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
        if part.is_empty() && (name == "test" || cfg.epochs > 0) {
            return Err(TrainError::EmptySplit(name));
        }
    }

    let mut shuffler = SeededRng::with_stream(cfg.seed, 1);
    let mut order = split.train.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        shuffler.shuffle(&mut order);
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = gather(model, ds, chunk)?;
            let loss = model.net.train_batch(&x, &y, opt)?;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, batch });
            }
        }
        let (train_loss, train_accuracy) = evaluate(model, ds, &split.train)?;
        let (valid_loss, valid_accuracy) = evaluate(model, ds, &split.valid)?;
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            train_accuracy,
            valid_loss,
            valid_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let (test_loss, test_accuracy) = evaluate(model, ds, &split.test)?;
    let (a, b, c) = split.sizes();
    Ok(TrainReport {
        model: model.spec.clone(),
        experiment: None,
        config: *cfg,
        split_sizes: [a, b, c],
        epochs,
        test_loss,
        test_accuracy,
        test_loss_x100: test_loss * 100.0,
    })
}

/// Index of the largest entry; the lowest index wins ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Averages per-segment probability rows and picks the winning class.
pub fn aggregate_segments(probs: &[Vec<f64>]) -> Result<(usize, Vec<f64>), TrainError> {
    let first = probs.first().ok_or(TrainError::NoSamples)?;
    if let Some(row) = probs.iter().find(|r| r.len() != first.len()) {
        return Err(TrainError::LengthMismatch {
            predictions: row.len(),
            labels: first.len(),
        });
    }
    let n = probs.len() as f64;
    // summing each column in sorted order makes the mean independent of segment order
    let mean: Vec<f64> = (0..first.len())
        .map(|c| {
            let mut col: Vec<f64> = probs.iter().map(|r| r[c]).collect();
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / n
        })
        .collect();
    Ok((argmax(&mean), mean))
}

/// Clip-level genre decision: the mean of per-segment softmax outputs.
pub fn predict_clip<T: Scalar>(
    model: &mut Model<T>,
    clip: &AudioClip,
    num_segments: usize,
    cfg: &DspConfig,
) -> Result<(usize, Vec<f64>), TrainError> {
    let clip = if clip.sample_rate() != cfg.sample_rate {
        resample(clip, cfg.sample_rate).map_err(DatasetError::from)?
    } else {
        clip.clone()
    };
    let ex = MfccExtractor::<f64>::new(cfg.clone()).map_err(DatasetError::from)?;
    let mut ds: Option<FeatureDataset> = None;
    for (i, seg) in segment_clip(&clip, num_segments)?.iter().enumerate() {
        let m = ex.mfcc(seg).map_err(DatasetError::from)?;
        let d = ds.get_or_insert_with(|| FeatureDataset::new(m.frames(), m.n_mfcc(), model.spec.num_classes));
        d.push(crate::dataset::Sample {
            values: m.values().iter().map(|&v| v as f32).collect(),
            label: 0,
            clip_id: 0,
            segment_index: i as u32,
        })?;
    }
    let ds = ds.ok_or(TrainError::NoSamples)?;
    check_shape(model, &ds)?;
    let all: Vec<u32> = (0..ds.len() as u32).collect();
    let mut rows = Vec::with_capacity(ds.len());
    for chunk in all.chunks(EVAL_BATCH) {
        let (x, _) = gather(model, &ds, chunk)?;
        let p = model.predict_proba(&x)?;
        let c = p.shape()[1];
        rows.extend(
            p.data()
                .chunks(c)
                .map(|r| r.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()),
        );
    }
    aggregate_segments(&rows)
}
