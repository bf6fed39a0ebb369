use super::{DspConfig, DspError, Matrix};
use crate::Scalar;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    } else {
        F_SP * mel
    }
}

/// Triangular filters spaced evenly in mel, each scaled to unit area
/// (`2 / (upper - lower)` in Hz). Shape `n_mels x (n_fft / 2 + 1)`.
pub fn mel_filterbank<T: Scalar>(cfg: &DspConfig) -> Result<Matrix<T>, DspError> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let n_mels = cfg.n_mels;
    let fft_freqs: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64)
        .collect();
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax_hz()));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut data = Vec::with_capacity(n_mels * n_bins);
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (right - left);
        for &f in &fft_freqs {
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            data.push(T::lit(rising.min(falling).max(0.0) * norm));
        }
    }
    Ok(Matrix::new(n_mels, n_bins, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slaney_breakpoint() {
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
        assert!((hz_to_mel(500.0) - 7.5).abs() < 1e-12);
        for hz in [0.0, 300.0, 999.0, 1000.0, 4000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn filters_nonnegative_and_cover_every_bin() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank::<f64>(&cfg).unwrap();
        assert_eq!((fb.rows, fb.cols), (40, 1025));
        assert!(fb.data.iter().all(|&w| w >= 0.0));
        for r in 0..fb.rows {
            assert!(fb.row(r).iter().any(|&w| w > 0.0), "row {r} empty");
        }
        // interior bins (strictly between the outermost edges) see some filter
        for k in 1..fb.cols - 1 {
            assert!((0..fb.rows).any(|r| fb.get(r, k) > 0.0), "bin {k} uncovered");
        }
    }

    #[test]
    fn inverted_band_is_rejected() {
        let cfg = DspConfig {
            fmin: 8000.0,
            fmax: Some(8000.0),
            ..Default::default()
        };
        assert!(mel_filterbank::<f64>(&cfg).is_err());
    }
}
