use std::path::PathBuf;

use mgr_core::audio_io::AudioClip;
use mgr_core::dsp::fixture::read_fixture;
use mgr_core::dsp::{mel_filterbank, DspConfig, Matrix, MfccExtractor};

const MFCC_TOL: f64 = 1e-3;
const MEL_TOL: f64 = 1e-6;

fn fixture(name: &str) -> Matrix<f64> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    read_fixture(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn input_clip(name: &str) -> AudioClip {
    let m = fixture(&format!("{name}_input.fix"));
    assert_eq!(m.cols, 1);
    let samples = m.data.iter().map(|&v| v as f32).collect();
    AudioClip::new(samples, 22050, name).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn mel_filterbank_matches_reference() {
    let reference = fixture("mel_40x1025.fix");
    let ours = mel_filterbank::<f64>(&DspConfig::default()).unwrap();
    assert_eq!((ours.rows, ours.cols), (reference.rows, reference.cols));
    let err = max_abs_diff(&ours.data, &reference.data);
    assert!(err <= MEL_TOL, "mel max abs diff {err:e}");
}

#[test]
fn mfcc_matches_reference_signals() {
    let ex = MfccExtractor::<f64>::new(DspConfig::default()).unwrap();
    for name in ["sine", "noise", "chirp", "short"] {
        let reference = fixture(&format!("{name}_mfcc.fix"));
        let ours = ex.mfcc(&input_clip(name)).unwrap();
        assert_eq!(ours.shape(), (reference.rows, reference.cols), "{name}");
        let err = max_abs_diff(ours.values(), &reference.data);
        assert!(err <= MFCC_TOL, "{name}: max abs diff {err:e}");
    }
}

#[test]
fn single_precision_extractor_stays_close() {
    let ex = MfccExtractor::<f32>::new(DspConfig::default()).unwrap();
    let reference = fixture("sine_mfcc.fix");
    let ours = ex.mfcc(&input_clip("sine")).unwrap();
    let ours: Vec<f64> = ours.values().iter().map(|&v| v as f64).collect();
    let err = max_abs_diff(&ours, &reference.data);
    assert!(err <= 0.05, "f32 max abs diff {err:e}");
}
