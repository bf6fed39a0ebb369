//! Balanced, segmented, labeled MFCC datasets and their splits.

mod build;
mod features_io;
mod manifest;
mod split;

pub use build::{build_feature_dataset, build_from_clips, segment_clip, worker_count};
pub use features_io::{decode_features, encode_features, load_features, save_features};
pub use manifest::{balance, GenreRegistry, Manifest, ManifestEntry};
pub use split::{
    largest_remainder, random_split, random_split_indices, select_fold_split, stratified_kfold,
    stratified_kfold_labels, SplitAssignment, SplitRatios,
};

use thiserror::Error;

use crate::audio_io::AudioError;
use crate::dsp::DspError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("genre {genre:?} has {count} clips, {required} required")]
    DeficientGenre {
        genre: String,
        count: usize,
        required: usize,
    },
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    DeficientClass { class: u32, count: usize, k: usize },
    #[error("clip has {len} samples, fewer than {segments} segments")]
    ClipTooShort { len: usize, segments: usize },
    #[error("sample shape {found:?} differs from dataset shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dataset is empty")]
    Empty,
    #[error("fold index {index} out of range for {folds} folds")]
    FoldOutOfRange { index: usize, folds: usize },
    #[error("feature file has bad magic")]
    BadMagic,
    #[error("feature file version {0} is not supported")]
    VersionMismatch(u32),
    #[error("feature file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("feature file checksum mismatch")]
    Checksum,
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    ClipRead {
        path: String,
        #[source]
        source: AudioError,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled MFCC matrix, traced back to its source clip and segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `frames x n_mfcc`, row-major.
    pub values: Vec<f32>,
    pub label: u32,
    pub clip_id: u32,
    pub segment_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub frames: usize,
    pub n_mfcc: usize,
    pub num_classes: usize,
    pub samples: Vec<Sample>,
}

impl FeatureDataset {
    pub fn new(frames: usize, n_mfcc: usize, num_classes: usize) -> Self {
        Self {
            frames,
            n_mfcc,
            num_classes,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: Sample) -> Result<(), DatasetError> {
        if sample.values.len() != self.frames * self.n_mfcc {
            return Err(DatasetError::ShapeMismatch {
                expected: (self.frames, self.n_mfcc),
                found: (sample.values.len() / self.n_mfcc.max(1), self.n_mfcc),
            });
        }
        if sample.label as usize >= self.num_classes {
            return Err(DatasetError::InvalidManifest(format!(
                "label {} outside {} classes",
                sample.label, self.num_classes
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.n_mfcc)
    }

    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }
}
