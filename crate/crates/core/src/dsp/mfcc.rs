use num_complex::Complex;

use super::{mel_filterbank, DspConfig, DspError, Matrix, MfccMatrix, Radix2Fft};
use crate::audio_io::AudioClip;
use crate::Scalar;

const POWER_FLOOR: f64 = 1e-10;
const TOP_DB: f64 = 80.0;

/// Periodic Hann window `0.5 - 0.5 cos(2 pi k / n)`.
pub fn hann_window<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|k| T::lit(0.5 - 0.5 * (std::f64::consts::TAU * k as f64 / n as f64).cos()))
        .collect()
}

/// Number of STFT frames for a signal of `len` samples.
pub fn frame_count(len: usize, cfg: &DspConfig) -> usize {
    if cfg.center {
        1 + len / cfg.hop
    } else if len < cfg.n_fft {
        0
    } else {
        1 + (len - cfg.n_fft) / cfg.hop
    }
}

/// Reflection without edge repetition, periodic for offsets beyond the signal.
fn reflect(index: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = index.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Orthonormal DCT-II by direct summation, first `n_out` coefficients.
pub fn dct_ii_ortho<T: Scalar>(x: &[T], n_out: usize) -> Vec<T> {
    let n = x.len();
    assert!(n_out <= n, "n_out exceeds input length");
    let nf = n as f64;
    (0..n_out)
        .map(|k| {
            let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.to_f64_lossy() * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum();
            T::lit(s * sum)
        })
        .collect()
}

/// `10 log10(max(S, 1e-10))`, floored at 80 dB below the matrix maximum.
pub fn power_to_db<T: Scalar>(s: &Matrix<T>) -> Matrix<T> {
    let floor = T::lit(POWER_FLOOR);
    let ten = T::lit(10.0);
    let mut db: Vec<T> = s.data.iter().map(|&v| ten * v.max(floor).log10()).collect();
    if let Some(peak) = db.iter().copied().reduce(T::max) {
        let low = peak - T::lit(TOP_DB);
        for v in db.iter_mut() {
            *v = v.max(low);
        }
    }
    Matrix::new(s.rows, s.cols, db)
}

/// Reusable MFCC pipeline for one configuration.
#[derive(Debug, Clone)]
pub struct MfccExtractor<T> {
    cfg: DspConfig,
    plan: Radix2Fft<T>,
    window: Vec<T>,
    mel: Matrix<T>,
    /// `n_mels x n_mfcc` transposed DCT basis
    dct: Vec<T>,
}

impl<T: Scalar> MfccExtractor<T> {
    pub fn new(cfg: DspConfig) -> Result<Self, DspError> {
        cfg.validate()?;
        let plan = Radix2Fft::new(cfg.n_fft)?;
        let window = hann_window(cfg.n_fft);
        let mel = mel_filterbank(&cfg)?;
        let n = cfg.n_mels;
        let mut dct = vec![T::zero(); n * cfg.n_mfcc];
        for i in 0..n {
            let mut unit = vec![T::zero(); n];
            unit[i] = T::one();
            for (k, v) in dct_ii_ortho(&unit, cfg.n_mfcc).into_iter().enumerate() {
                dct[i * cfg.n_mfcc + k] = v;
            }
        }
        Ok(Self {
            cfg,
            plan,
            window,
            mel,
            dct,
        })
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    pub fn mel_filterbank(&self) -> &Matrix<T> {
        &self.mel
    }

    fn check_clip(&self, clip: &AudioClip) -> Result<(), DspError> {
        if clip.is_empty() {
            return Err(DspError::EmptySignal);
        }
        if clip.sample_rate() != self.cfg.sample_rate {
            return Err(DspError::SampleRateMismatch {
                clip: clip.sample_rate(),
                config: self.cfg.sample_rate,
            });
        }
        Ok(())
    }

    /// `frames x (n_fft / 2 + 1)` power spectrogram.
    pub fn stft_power(&self, clip: &AudioClip) -> Result<Matrix<T>, DspError> {
        self.check_clip(clip)?;
        let samples = clip.samples();
        let n_fft = self.cfg.n_fft;
        let frames = frame_count(samples.len(), &self.cfg);
        if frames == 0 {
            return Err(DspError::EmptySignal);
        }
        let pad = if self.cfg.center { (n_fft / 2) as isize } else { 0 };
        let n_bins = self.cfg.n_bins();
        let mut out = Vec::with_capacity(frames * n_bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        for t in 0..frames {
            let origin = (t * self.cfg.hop) as isize - pad;
            for (i, slot) in buf.iter_mut().enumerate() {
                let src = reflect(origin + i as isize, samples.len());
                let x = T::lit(samples[src] as f64) * self.window[i];
                *slot = Complex::new(x, T::zero());
            }
            self.plan.process(&mut buf, false);
            out.extend(buf[..n_bins].iter().map(|z| z.norm_sqr()));
        }
        Ok(Matrix::new(frames, n_bins, out))
    }

    /// `frames x n_mels` mel power spectrogram.
    pub fn mel_power(&self, clip: &AudioClip) -> Result<Matrix<T>, DspError> {
        let power = self.stft_power(clip)?;
        let (frames, n_mels) = (power.rows, self.cfg.n_mels);
        let mut mel = vec![T::zero(); frames * n_mels];
        T::gemm(
            frames,
            power.cols,
            n_mels,
            &power.data,
            false,
            &self.mel.data,
            true,
            T::zero(),
            &mut mel,
        );
        Ok(Matrix::new(frames, n_mels, mel))
    }

    pub fn mfcc(&self, clip: &AudioClip) -> Result<MfccMatrix<T>, DspError> {
        let db = power_to_db(&self.mel_power(clip)?);
        let n_mfcc = self.cfg.n_mfcc;
        let mut out = vec![T::zero(); db.rows * n_mfcc];
        T::gemm(
            db.rows,
            db.cols,
            n_mfcc,
            &db.data,
            false,
            &self.dct,
            false,
            T::zero(),
            &mut out,
        );
        Ok(MfccMatrix::from_matrix(Matrix::new(db.rows, n_mfcc, out)))
    }
}

pub fn stft_power<T: Scalar>(clip: &AudioClip, cfg: &DspConfig) -> Result<Matrix<T>, DspError> {
    MfccExtractor::new(cfg.clone())?.stft_power(clip)
}

pub fn mfcc<T: Scalar>(clip: &AudioClip, cfg: &DspConfig) -> Result<MfccMatrix<T>, DspError> {
    MfccExtractor::new(cfg.clone())?.mfcc(clip)
}
