use thiserror::Error;

use crate::audio_io::AudioError;
use crate::dataset::DatasetError;
use crate::dsp::DspError;
use crate::nn::NnError;
use crate::train::TrainError;

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid experiment number {0} (expected 1..=6)")]
    UnknownExperiment(u32),
}

impl Error {
    /// True when the failure is a numeric divergence rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Train(TrainError::Divergence { .. }))
    }
}
