//! WAV ingestion, mono mixdown, resampling and middle-window trimming.
//!
//! Resampling is plain linear interpolation. It aliases any content above the
//! target Nyquist rate, which is tolerable for MFCC-level features but not for
//! listening.

use std::fs;
use std::path::Path;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("WAV data chunk is empty")]
    EmptyData,
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono PCM audio normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::InvalidClip(format!(
                "sample {pos} = {} is outside [-1, 1]",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Exact duration in seconds as `len / sample_rate`.
    pub fn duration_exact(&self) -> Ratio<u64> {
        Ratio::new(self.samples.len() as u64, self.sample_rate as u64)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sub-clip `[start, end)` in samples, tagged with a derived source id.
    pub fn slice(&self, start: usize, end: usize, tag: &str) -> AudioClip {
        AudioClip {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
            source_id: format!("{}#{tag}", self.source_id),
        }
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Pcm16,
    Pcm24,
    Float32,
}

impl Encoding {
    fn bytes(self) -> usize {
        match self {
            Encoding::Pcm16 => 2,
            Encoding::Pcm24 => 3,
            Encoding::Float32 => 4,
        }
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_wav(&bytes, path.display().to_string())
}

/// Decodes an in-memory RIFF/WAVE file. Stereo is mixed to mono by averaging.
pub fn decode_wav(bytes: &[u8], source_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader(format!(
            "expected RIFF magic, found {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing WAVE form type".into()));
    }

    let mut format: Option<(Encoding, usize, u32)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                AudioError::MalformedHeader(format!("chunk {:?} overruns the file", String::from_utf8_lossy(id)))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let (encoding, channels, sample_rate) =
        format.ok_or_else(|| AudioError::MalformedHeader("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedHeader("missing data chunk".into()))?;
    let frame_bytes = encoding.bytes() * channels;
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(AudioError::EmptyData);
    }

    let mut samples = Vec::with_capacity(frames);
    for frame in data.chunks_exact(frame_bytes) {
        let mut acc = 0.0f64;
        for ch in frame.chunks_exact(encoding.bytes()) {
            acc += decode_sample(encoding, ch);
        }
        let v = (acc / channels as f64) as f32;
        if !v.is_finite() {
            return Err(AudioError::InvalidClip("non-finite float sample".into()));
        }
        samples.push(v.clamp(-1.0, 1.0));
    }
    AudioClip::new(samples, sample_rate, source_id)
}

fn parse_fmt(body: &[u8]) -> Result<(Encoding, usize, u32), AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedHeader("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2) as usize;
    let sample_rate = u32_at(body, 4);
    let bits = u16_at(body, 14);
    if tag == 0xFFFE {
        // WAVE_FORMAT_EXTENSIBLE: the real tag leads the sub-format GUID.
        if body.len() < 26 {
            return Err(AudioError::MalformedHeader("truncated extensible fmt chunk".into()));
        }
        tag = u16_at(body, 24);
    }
    if !(1..=2).contains(&channels) {
        return Err(AudioError::Unsupported(format!("{channels} channels")));
    }
    if sample_rate == 0 {
        return Err(AudioError::MalformedHeader("zero sample rate".into()));
    }
    let encoding = match (tag, bits) {
        (1, 16) => Encoding::Pcm16,
        (1, 24) => Encoding::Pcm24,
        (3, 32) => Encoding::Float32,
        (t, b) => return Err(AudioError::Unsupported(format!("format tag {t}, {b} bits"))),
    };
    Ok((encoding, channels, sample_rate))
}

fn decode_sample(encoding: Encoding, b: &[u8]) -> f64 {
    match encoding {
        Encoding::Pcm16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        Encoding::Pcm24 => {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        Encoding::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
    }
}

/// Encodes a clip as 16-bit PCM mono. Samples saturate at the integer range.
pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, AudioError> {
    if clip.is_empty() {
        return Err(AudioError::EmptyData);
    }
    let data_len = clip.len() * 2;
    let riff_len =
        u32::try_from(36 + data_len).map_err(|_| AudioError::InvalidClip("clip too long for a RIFF file".into()))?;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let bytes = encode_wav(clip)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Linear-interpolation resampling; the last source sample is held at the end.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target rate must be positive".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let (from, to) = (clip.sample_rate as u64, target_rate as u64);
    let out_len = ((src.len() as u64 * to + from / 2) / from) as usize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len as u64 {
        // position i * from / to, split into integer and fractional parts exactly
        let num = i * from;
        let idx = (num / to) as usize;
        let frac = (num % to) as f64 / to as f64;
        let v = match (src.get(idx), src.get(idx + 1)) {
            (Some(&a), Some(&b)) => a as f64 + (b as f64 - a as f64) * frac,
            (Some(&a), None) => a as f64,
            _ => *src.last().unwrap_or(&0.0) as f64,
        };
        out.push(v as f32);
    }
    AudioClip::new(out, target_rate, clip.source_id.clone())
}

/// All full `window_seconds` windows, laid out contiguously and centered on
/// the clip midpoint. Each window holds `floor(window_seconds * rate)` samples.
pub fn trim_middle_windows(clip: &AudioClip, window_seconds: f64) -> Vec<AudioClip> {
    if !(window_seconds > 0.0) {
        return Vec::new();
    }
    let exact = window_seconds * clip.sample_rate as f64;
    let win = exact.floor() as usize;
    if win == 0 {
        return Vec::new();
    }
    let count = (clip.len() as f64 / exact).floor() as usize;
    let start = (clip.len() - count * win) / 2;
    (0..count)
        .map(|i| {
            let s = start + i * win;
            clip.slice(s, s + win, &format!("w{i}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(tag: u16, channels: u16, bits: u16, rate: u32, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let block = channels * bits / 8;
        out.extend_from_slice(&(rate * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    fn clip(samples: Vec<f32>, rate: u32) -> AudioClip {
        AudioClip::new(samples, rate, "t").unwrap()
    }

    #[test]
    fn pcm16_mono_scales_by_two_to_fifteen() {
        let mut data = Vec::new();
        data.extend_from_slice(&16384i16.to_le_bytes());
        data.extend_from_slice(&(-16384i16).to_le_bytes());
        let c = decode_wav(&wav_bytes(1, 1, 16, 8000, &data), "x").unwrap();
        assert_eq!(c.samples(), &[0.5, -0.5]);
        assert_eq!(c.sample_rate(), 8000);
    }

    #[test]
    fn stereo_float_is_averaged() {
        let mut data = Vec::new();
        data.extend_from_slice(&0.4f32.to_le_bytes());
        data.extend_from_slice(&0.8f32.to_le_bytes());
        let c = decode_wav(&wav_bytes(3, 2, 32, 8000, &data), "x").unwrap();
        assert!((c.samples()[0] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn pcm24_decodes_sign_extended() {
        let data = [0x00, 0x00, 0xC0, 0x00, 0x00, 0x40];
        let c = decode_wav(&wav_bytes(1, 1, 24, 8000, &data), "x").unwrap();
        assert_eq!(c.samples(), &[-0.5, 0.5]);
    }

    #[test]
    fn rifx_is_malformed() {
        let mut b = wav_bytes(1, 1, 16, 8000, &[0, 0]);
        b[..4].copy_from_slice(b"RIFX");
        assert!(matches!(decode_wav(&b, "x"), Err(AudioError::MalformedHeader(_))));
    }

    #[test]
    fn compressed_and_multichannel_are_unsupported() {
        let adpcm = wav_bytes(2, 1, 4, 8000, &[0, 0]);
        assert!(matches!(decode_wav(&adpcm, "x"), Err(AudioError::Unsupported(_))));
        let quad = wav_bytes(1, 4, 16, 8000, &[0; 8]);
        assert!(matches!(decode_wav(&quad, "x"), Err(AudioError::Unsupported(_))));
    }

    #[test]
    fn empty_data_chunk_is_refused() {
        let b = wav_bytes(1, 1, 16, 8000, &[]);
        assert!(matches!(decode_wav(&b, "x"), Err(AudioError::EmptyData)));
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let mut b = wav_bytes(1, 1, 16, 8000, &16384i16.to_le_bytes());
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), &[1, 2, 3, 0]].concat();
        b.splice(12..12, list);
        let c = decode_wav(&b, "x").unwrap();
        assert_eq!(c.samples(), &[0.5]);
    }

    #[test]
    fn write_saturates_full_scale() {
        let bytes = encode_wav(&clip(vec![1.0, -1.0], 100)).unwrap();
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 32767);
        assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), -32768);
    }

    #[test]
    fn write_refuses_empty_clip() {
        assert!(matches!(encode_wav(&clip(vec![], 100)), Err(AudioError::EmptyData)));
    }

    #[test]
    fn sine_round_trip_within_quantization() {
        let sr = 22050;
        let s: Vec<f32> = (0..sr)
            .map(|i| (0.8 * (std::f64::consts::TAU * 440.0 * i as f64 / sr as f64).sin()) as f32)
            .collect();
        let original = clip(s, sr);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        write_wav(&original, &path).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), original.len());
        let worst = original
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(worst <= 1.0 / 32768.0, "{worst}");
    }

    #[test]
    fn resample_identity_and_hand_example() {
        let c = clip(vec![0.1, 0.2, 0.3], 22050);
        assert_eq!(resample(&c, 22050).unwrap(), c);
        let up = resample(&clip(vec![0.0, 1.0], 2), 4).unwrap();
        assert_eq!(up.samples(), &[0.0, 0.5, 1.0, 1.0]);
        let down = resample(&clip(vec![0.0; 44100], 44100), 22050).unwrap();
        assert_eq!(down.len(), 22050);
    }

    #[test]
    fn middle_windows() {
        let sr = 100;
        let c = clip(vec![0.0; 95 * sr as usize], sr);
        let w = trim_middle_windows(&c, 30.0);
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|x| x.len() == 3000));
        // starts at 2.5 s
        let marked: Vec<f32> = (0..95 * sr).map(|i| i as f32 / 1e5).collect();
        let w = trim_middle_windows(&clip(marked, sr), 30.0);
        assert_eq!(w[0].samples()[0], 250.0 / 1e5);
        assert_eq!(w[1].samples()[0], 3250.0 / 1e5);
        assert_eq!(w[2].samples()[0], 6250.0 / 1e5);

        let exact = clip(vec![0.25; 30 * sr as usize], sr);
        let w = trim_middle_windows(&exact, 30.0);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples(), exact.samples());

        assert!(trim_middle_windows(&clip(vec![0.0; 29 * sr as usize], sr), 30.0).is_empty());
    }

    #[test]
    fn duration_is_exact() {
        let c = clip(vec![0.0; 33075], 22050);
        assert_eq!(c.duration_exact(), Ratio::new(3, 2));
    }
}
