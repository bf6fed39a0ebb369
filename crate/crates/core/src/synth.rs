//! Parametric stand-in corpus: eight signal families with seeded jitter.
//! Families share frequency ranges on purpose, the primary parameter is
//! redrawn for every note, and a fluctuating noise floor sits on top, so the
//! task is learnable without being trivial.
//!
//! | family         | content                            | primary (per note) | secondary (per clip) |
//! |----------------|------------------------------------|--------------------|----------------------|
//! | sine-chord     | major triad of sines with a swell  | root 130–520 Hz    | swell depth 0–0.5    |
//! | noise-band     | noise through two band-passes      | centre 0.8–4 kHz   | Q 1–4                |
//! | am-noise       | amplitude-modulated white noise    | rate 2–8 Hz        | depth 0.3–0.9        |
//! | chirp-train    | rising sweeps up to 4 kHz          | period 0.15–0.5 s  | start 300–1000 Hz    |
//! | square-wave    | pulse-width square wave            | 80–400 Hz          | duty 0.3–0.7         |
//! | pulse-train    | resonant clicks                    | rate 3–20 Hz       | resonance 0.6–3 kHz  |
//! | filtered-noise | noise through two low-passes       | cutoff 0.2–1.5 kHz | extra Q 0–1          |
//! | harmonic-stack | 10 harmonics with 1% vibrato       | 130–520 Hz         | vibrato 3–7 Hz       |
//!
//! Background noise is 0.01–1.0 times the note level, redrawn log-uniformly
//! every [`NOISE_BLOCK_SECONDS`].

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{write_wav, AudioClip};
use crate::dataset::{DatasetError, GenreRegistry, Manifest, ManifestEntry};
use crate::rng::SeededRng;

pub const SYNTH_SAMPLE_RATE: u32 = 22050;
pub const PEAK_LIMIT: f64 = 0.99;
pub const NOISE_BLOCK_SECONDS: f64 = 0.25;
/// Note durations; the primary parameter is redrawn for every note.
pub const NOTE_SECONDS: Range = Range::new(0.3, 1.5);
const FADE_SECONDS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SineChord,
    NoiseBand,
    AmNoise,
    ChirpTrain,
    SquareWave,
    PulseTrain,
    FilteredNoise,
    HarmonicStack,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::SineChord,
        Family::NoiseBand,
        Family::AmNoise,
        Family::ChirpTrain,
        Family::SquareWave,
        Family::PulseTrain,
        Family::FilteredNoise,
        Family::HarmonicStack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SineChord => "sine-chord",
            Family::NoiseBand => "noise-band",
            Family::AmNoise => "am-noise",
            Family::ChirpTrain => "chirp-train",
            Family::SquareWave => "square-wave",
            Family::PulseTrain => "pulse-train",
            Family::FilteredNoise => "filtered-noise",
            Family::HarmonicStack => "harmonic-stack",
        }
    }
}

/// A closed interval a parameter is drawn from per clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut SeededRng) -> f64 {
        rng.uniform_range(self.lo, self.hi)
    }
}

/// One synthetic genre: a family and the jitter ranges of its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGenreSpec {
    pub name: String,
    pub family: Family,
    /// Family-specific primary parameter (base frequency, rate, or cutoff).
    pub primary: Range,
    /// Family-specific secondary parameter.
    pub secondary: Range,
    /// Background white-noise level relative to the signal peak.
    pub noise_level: Range,
    /// Output peak amplitude.
    pub peak: Range,
}

impl SynthGenreSpec {
    pub fn default_for(family: Family) -> Self {
        let (primary, secondary) = match family {
            Family::SineChord => (Range::new(130.0, 520.0), Range::new(0.0, 0.5)),
            Family::NoiseBand => (Range::new(800.0, 4000.0), Range::new(1.0, 4.0)),
            Family::AmNoise => (Range::new(2.0, 8.0), Range::new(0.3, 0.9)),
            Family::ChirpTrain => (Range::new(0.15, 0.5), Range::new(300.0, 1000.0)),
            Family::SquareWave => (Range::new(80.0, 400.0), Range::new(0.3, 0.7)),
            Family::PulseTrain => (Range::new(3.0, 20.0), Range::new(600.0, 3000.0)),
            Family::FilteredNoise => (Range::new(200.0, 1500.0), Range::new(0.0, 1.0)),
            Family::HarmonicStack => (Range::new(130.0, 520.0), Range::new(3.0, 7.0)),
        };
        Self {
            name: family.name().to_string(),
            family,
            primary,
            secondary,
            noise_level: Range::new(0.01, 1.0),
            peak: Range::new(0.5, PEAK_LIMIT),
        }
    }
}

pub fn default_genres() -> Vec<SynthGenreSpec> {
    Family::ALL.iter().map(|&f| SynthGenreSpec::default_for(f)).collect()
}

/// Second-order section using the common cookbook coefficient formulas.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn new(b: [f64; 3], a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [a1 / a0, a2 / a0],
            z: [0.0; 2],
        }
    }

    fn band_pass(f0: f64, q: f64, sr: f64) -> Self {
        let w = TAU * f0 / sr;
        let alpha = w.sin() / (2.0 * q);
        Self::new([alpha, 0.0, -alpha], 1.0 + alpha, -2.0 * w.cos(), 1.0 - alpha)
    }

    fn low_pass(f0: f64, q: f64, sr: f64) -> Self {
        let w = TAU * f0 / sr;
        let (c, alpha) = (w.cos(), w.sin() / (2.0 * q));
        let b1 = 1.0 - c;
        Self::new([b1 / 2.0, b1, b1 / 2.0], 1.0 + alpha, -2.0 * c, 1.0 - alpha)
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

fn white(rng: &mut SeededRng) -> f64 {
    rng.uniform() * 2.0 - 1.0
}

fn render_family(spec: &SynthGenreSpec, n: usize, sr: f64, p: f64, s: f64, rng: &mut SeededRng) -> Vec<f64> {
    let t = |i: usize| i as f64 / sr;
    match spec.family {
        Family::SineChord => {
            let phases: Vec<f64> = (0..3).map(|_| rng.uniform() * TAU).collect();
            let ratios = [1.0, 1.25, 1.5];
            (0..n)
                .map(|i| {
                    let swell = 1.0 - s * (0.5 + 0.5 * (TAU * 0.5 * t(i)).sin());
                    swell
                        * ratios
                            .iter()
                            .zip(&phases)
                            .map(|(r, ph)| (TAU * p * r * t(i) + ph).sin())
                            .sum::<f64>()
                })
                .collect()
        }
        Family::NoiseBand => {
            let mut f = Biquad::band_pass(p, s, sr);
            let mut g = Biquad::band_pass(p, s, sr);
            (0..n).map(|_| g.tick(f.tick(white(rng)))).collect()
        }
        Family::AmNoise => {
            let ph = rng.uniform() * TAU;
            (0..n)
                .map(|i| (1.0 - s * (0.5 + 0.5 * (TAU * p * t(i) + ph).cos())) * white(rng))
                .collect()
        }
        Family::ChirpTrain => {
            let (period, f_start, f_end) = (p, s, 4000.0);
            let k = (f_end - f_start) / period;
            (0..n)
                .map(|i| {
                    let tau = t(i) % period;
                    let env = (std::f64::consts::PI * tau / period).sin();
                    env * (TAU * (f_start * tau + 0.5 * k * tau * tau)).sin()
                })
                .collect()
        }
        Family::SquareWave => {
            let ph = rng.uniform();
            (0..n)
                .map(|i| {
                    let cycle = (p * t(i) + ph).fract();
                    if cycle < s {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        }
        Family::PulseTrain => {
            let (rate, f0) = (p, s);
            let mut res = Biquad::band_pass(f0, 8.0, sr);
            let period = (sr / rate).round() as usize;
            let offset = rng.below(period as u64) as usize;
            (0..n)
                .map(|i| res.tick(if (i + offset).is_multiple_of(period) { 1.0 } else { 0.0 }))
                .collect()
        }
        Family::FilteredNoise => {
            let mut f = Biquad::low_pass(p, 0.7 + s, sr);
            let mut g = Biquad::low_pass(p, 0.7, sr);
            (0..n).map(|_| g.tick(f.tick(white(rng)))).collect()
        }
        Family::HarmonicStack => {
            let (f0, vib_rate) = (p, s);
            let depth = 0.01 * f0;
            let mut phase = 0.0;
            (0..n)
                .map(|i| {
                    let f = f0 + depth * (TAU * vib_rate * t(i)).sin();
                    phase += TAU * f / sr;
                    (1..=10).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>()
                })
                .collect()
        }
    }
}

/// Renders one clip of `seconds` at [`SYNTH_SAMPLE_RATE`]; peak ≤ 0.99.
pub fn render_clip(spec: &SynthGenreSpec, seconds: f64, rng: &mut SeededRng) -> Vec<f32> {
    let sr = SYNTH_SAMPLE_RATE as f64;
    let n = (seconds * sr).round() as usize;
    // the secondary parameter is fixed per clip, the primary one per note
    let s = spec.secondary.draw(rng);
    let fade = (FADE_SECONDS * sr) as usize;
    let mut x = Vec::with_capacity(n);
    while x.len() < n {
        let len = ((NOTE_SECONDS.draw(rng) * sr) as usize).min(n - x.len());
        let p = spec.primary.draw(rng);
        let mut note = render_family(spec, len, sr, p, s, rng);
        let scale = note.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            note.iter_mut().for_each(|v| *v /= scale);
        }
        let f = fade.min(len / 2);
        for i in 0..f {
            let g = i as f64 / f as f64;
            note[i] *= g;
            note[len - 1 - i] *= g;
        }
        x.extend(note);
    }
    // background level is redrawn log-uniformly every block and interpolated
    let block = (NOISE_BLOCK_SECONDS * sr) as usize;
    let (lo, hi) = (spec.noise_level.lo.ln(), spec.noise_level.hi.ln());
    let levels: Vec<f64> = (0..n / block + 2).map(|_| rng.uniform_range(lo, hi).exp()).collect();
    for (i, v) in x.iter_mut().enumerate() {
        let (b, frac) = (i / block, (i % block) as f64 / block as f64);
        let level = levels[b] + (levels[b + 1] - levels[b]) * frac;
        *v += level * white(rng);
    }
    let peak = spec.peak.draw(rng).min(PEAK_LIMIT);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if scale > 0.0 { peak / scale } else { 0.0 };
    x.iter().map(|v| (v * gain) as f32).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub genres: Vec<SynthGenreSpec>,
    pub clips_per_genre: usize,
    pub clip_seconds: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            genres: default_genres(),
            clips_per_genre: 20,
            clip_seconds: 30.0,
            seed: 0,
        }
    }
}

/// Generator of clip `index` of `genre`: independent of every other clip.
fn clip_rng(seed: u64, genre: usize, index: usize) -> SeededRng {
    SeededRng::with_stream(seed, ((genre as u64) << 32) | index as u64)
}

/// Renders the corpus in memory as `(clip, genre index)` pairs.
pub fn generate_clips(cfg: &CorpusConfig) -> Result<Vec<(AudioClip, u32)>, DatasetError> {
    let mut out = Vec::with_capacity(cfg.genres.len() * cfg.clips_per_genre);
    for (g, spec) in cfg.genres.iter().enumerate() {
        for c in 0..cfg.clips_per_genre {
            let samples = render_clip(spec, cfg.clip_seconds, &mut clip_rng(cfg.seed, g, c));
            let clip = AudioClip::new(samples, SYNTH_SAMPLE_RATE, format!("{}-{c:03}", spec.name))?;
            out.push((clip, g as u32));
        }
    }
    Ok(out)
}

/// Writes `<out_dir>/<genre>/<genre>-NNN.wav` plus `<out_dir>/manifest.json`.
pub fn write_corpus(cfg: &CorpusConfig, out_dir: &Path) -> Result<Manifest, DatasetError> {
    let registry = GenreRegistry::new(cfg.genres.iter().map(|g| g.name.clone()).collect())?;
    let mut entries = Vec::new();
    for (g, spec) in cfg.genres.iter().enumerate() {
        let dir = out_dir.join(&spec.name);
        std::fs::create_dir_all(&dir)?;
        for c in 0..cfg.clips_per_genre {
            let id = format!("{}-{c:03}", spec.name);
            let samples = render_clip(spec, cfg.clip_seconds, &mut clip_rng(cfg.seed, g, c));
            let clip = AudioClip::new(samples, SYNTH_SAMPLE_RATE, id.clone())?;
            let path: PathBuf = dir.join(format!("{id}.wav"));
            write_wav(&clip, &path)?;
            entries.push(ManifestEntry {
                path,
                genre: g as u32,
                source_id: id,
            });
        }
    }
    // the saved manifest stores paths relative to its own directory
    let relative = entries
        .iter()
        .map(|e| ManifestEntry {
            path: e.path.strip_prefix(out_dir).unwrap_or(&e.path).to_path_buf(),
            ..e.clone()
        })
        .collect();
    Manifest::new(registry.clone(), relative)?.save(out_dir.join("manifest.json"))?;
    Manifest::new(registry, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fft;
    use num_complex::Complex;

    fn spectral_centroid(x: &[f32]) -> f64 {
        let n = 8192;
        let mut acc = vec![0.0; n / 2 + 1];
        for chunk in x.chunks_exact(n).take(4) {
            let buf: Vec<Complex<f64>> = chunk.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
            let spec = fft(&buf, false).unwrap();
            for (a, s) in acc.iter_mut().zip(&spec) {
                *a += s.norm_sqr();
            }
        }
        let total: f64 = acc.iter().sum();
        let hz = SYNTH_SAMPLE_RATE as f64 / n as f64;
        acc.iter().enumerate().map(|(k, p)| k as f64 * hz * p).sum::<f64>() / total
    }

    #[test]
    fn clips_respect_peak_and_length() {
        for spec in default_genres() {
            let x = render_clip(&spec, 2.0, &mut SeededRng::new(1));
            assert_eq!(x.len(), 44100);
            let peak = x.iter().fold(0.0f32, |m, v| m.max(v.abs()));
            assert!(peak <= PEAK_LIMIT as f32 && peak >= 0.49, "{}: {peak}", spec.name);
        }
    }

    #[test]
    fn families_are_spectrally_distinct() {
        // without the noise floor each family stays in its own region
        let c: Vec<f64> = default_genres()
            .into_iter()
            .map(|s| SynthGenreSpec {
                noise_level: Range::new(1e-4, 1e-4),
                ..s
            })
            .map(|s| spectral_centroid(&render_clip(&s, 2.0, &mut SeededRng::new(2))))
            .collect();
        let [chord, band, am, _, square, pulse, low, _] = c[..] else {
            unreachable!()
        };
        assert!(low < 1500.0 && chord < 1000.0, "{c:?}");
        assert!((800.0..4000.0).contains(&band), "{c:?}");
        assert!(am > 4000.0, "{c:?}");
        assert!((600.0..3100.0).contains(&pulse), "{c:?}");
        assert!(square < 2500.0, "{c:?}");
    }

    #[test]
    fn corpus_is_deterministic() {
        let cfg = CorpusConfig {
            clips_per_genre: 1,
            clip_seconds: 0.5,
            seed: 9,
            ..CorpusConfig::default()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let ma = write_corpus(&cfg, dir_a.path()).unwrap();
        write_corpus(&cfg, dir_b.path()).unwrap();
        assert_eq!(ma.entries.len(), 8);
        assert_eq!(Manifest::load(dir_a.path().join("manifest.json")).unwrap(), ma);
        for e in &ma.entries {
            let rel = e.path.strip_prefix(dir_a.path()).unwrap();
            let a = std::fs::read(&e.path).unwrap();
            let b = std::fs::read(dir_b.path().join(rel)).unwrap();
            assert_eq!(a, b);
        }
        let clips = generate_clips(&cfg).unwrap();
        assert_eq!(clips.len(), 8);
        assert_ne!(
            clips[0].0.samples(),
            generate_clips(&CorpusConfig {
                seed: 10,
                ..cfg.clone()
            })
            .unwrap()[0]
                .0
                .samples()
        );
    }
}
