//! Music-genre recognition toolkit.
//!
//! The pipeline runs WAV ingestion ([`audio_io`]), MFCC extraction ([`dsp`]),
//! balanced dataset construction and splitting ([`dataset`]), a small
//! hand-differentiated neural-network engine ([`nn`]), the DNN and CNN
//! classifiers with their experiment registry ([`models`]), and the training
//! loop ([`train`]). [`synth`] generates a parametric substitute corpus.
//!
//! Numeric code is generic over [`Scalar`] (`f32` and `f64`). Training runs in
//! `f32`; gradient verification runs in `f64`. The aliases below name the
//! common instantiations.

pub mod audio_io;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod models;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod train;

pub use error::Error;
pub use scalar::Scalar;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Sequential32 = nn::Sequential<f32>;
pub type Sequential64 = nn::Sequential<f64>;
pub type Model32 = models::Model<f32>;
pub type Model64 = models::Model<f64>;
pub type MfccMatrix32 = dsp::MfccMatrix<f32>;
pub type MfccMatrix64 = dsp::MfccMatrix<f64>;
pub type MfccExtractor32 = dsp::MfccExtractor<f32>;
pub type MfccExtractor64 = dsp::MfccExtractor<f64>;
pub type Adam32 = nn::Adam<f32>;
pub type Adam64 = nn::Adam<f64>;
