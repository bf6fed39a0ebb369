//! MFCC front-end: framing, Hann window, radix-2 FFT, Slaney mel filterbank,
//! decibel compression and orthonormal DCT-II.
//!
//! Defaults (22050 Hz, 2048-point frames, hop 512, centered reflect padding)
//! give 44 frames for a one-second segment and 2 frames for a 551-sample
//! segment.

mod fft;
pub mod fixture;
mod mel;
mod mfcc;

pub use fft::{fft, naive_dft, Radix2Fft};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz};
pub use mfcc::{dct_ii_ortho, frame_count, hann_window, mfcc, power_to_db, stft_power, MfccExtractor};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("cannot analyse an empty signal")]
    EmptySignal,
    #[error("clip sample rate {clip} Hz does not match configured {config} Hz")]
    SampleRateMismatch { clip: u32, config: u32 },
    #[error("invalid DSP configuration: {0}")]
    InvalidConfig(String),
    #[error("bad fixture file: {0}")]
    BadFixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin: f64,
    /// Upper band edge; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub center: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_fft: 2048,
            hop: 512,
            n_mels: 40,
            n_mfcc: 13,
            fmin: 0.0,
            fmax: None,
            center: true,
        }
    }
}

impl DspConfig {
    pub fn fmax_hz(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::InvalidConfig(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(DspError::NotPowerOfTwo(self.n_fft));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return bad("hop must satisfy 0 < hop <= n_fft");
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad("n_mfcc must satisfy 0 < n_mfcc <= n_mels");
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let fmax = self.fmax_hz();
        if !(self.fmin >= 0.0 && fmax > self.fmin && fmax <= nyquist) {
            return bad("band edges must satisfy 0 <= fmin < fmax <= sample_rate / 2");
        }
        Ok(())
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix buffer has wrong length");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// `frames x n_mfcc` cepstral coefficients, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix<T>(Matrix<T>);

impl<T: Copy> MfccMatrix<T> {
    pub fn from_matrix(m: Matrix<T>) -> Self {
        Self(m)
    }

    pub fn frames(&self) -> usize {
        self.0.rows
    }

    pub fn n_mfcc(&self) -> usize {
        self.0.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.0.rows, self.0.cols)
    }

    pub fn values(&self) -> &[T] {
        &self.0.data
    }

    pub fn get(&self, frame: usize, coeff: usize) -> T {
        self.0.get(frame, coeff)
    }

    pub fn into_values(self) -> Vec<T> {
        self.0.data
    }
}
