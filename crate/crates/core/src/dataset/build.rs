use std::thread;

use super::{DatasetError, FeatureDataset, Manifest, Sample};
use crate::audio_io::{read_wav, resample, AudioClip};
use crate::dsp::{DspConfig, MfccExtractor};

/// Splits a clip into `num_segments` equal contiguous pieces of
/// `floor(len / num_segments)` samples; trailing samples are dropped.
pub fn segment_clip(clip: &AudioClip, num_segments: usize) -> Result<Vec<AudioClip>, DatasetError> {
    if num_segments == 0 || clip.len() < num_segments {
        return Err(DatasetError::ClipTooShort {
            len: clip.len(),
            segments: num_segments,
        });
    }
    let seg = clip.len() / num_segments;
    Ok((0..num_segments)
        .map(|i| clip.slice(i * seg, (i + 1) * seg, &format!("s{i}")))
        .collect())
}

/// Extraction worker count: available cores, capped by `MGR_THREADS`.
pub fn worker_count() -> usize {
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("MGR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap > 0 => cores.min(cap),
        _ => cores,
    }
}

fn extract_clip(
    ex: &MfccExtractor<f64>,
    clip: &AudioClip,
    label: u32,
    clip_id: u32,
    num_segments: usize,
) -> Result<(usize, Vec<Sample>), DatasetError> {
    let clip = if clip.sample_rate() != ex.config().sample_rate {
        resample(clip, ex.config().sample_rate)?
    } else {
        clip.clone()
    };
    let mut frames = 0;
    let mut out = Vec::with_capacity(num_segments);
    for (i, seg) in segment_clip(&clip, num_segments)?.iter().enumerate() {
        let m = ex.mfcc(seg)?;
        frames = m.frames();
        out.push(Sample {
            values: m.values().iter().map(|&v| v as f32).collect(),
            label,
            clip_id,
            segment_index: i as u32,
        });
    }
    Ok((frames, out))
}

/// Runs `job(i)` for `0..n` on `workers` threads, preserving index order.
fn ordered_map<R: Send>(
    n: usize,
    workers: usize,
    job: impl Fn(usize) -> Result<R, DatasetError> + Sync,
) -> Result<Vec<R>, DatasetError> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(&job).collect();
    }
    let chunk = n.div_ceil(workers);
    let job = &job;
    thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w * chunk..((w + 1) * chunk).min(n))
                        .map(job)
                        .collect::<Result<Vec<R>, DatasetError>>()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(n);
        for h in handles {
            all.extend(h.join().expect("extraction worker panicked")?);
        }
        Ok(all)
    })
}

fn assemble(
    per_clip: Vec<(usize, Vec<Sample>)>,
    num_classes: usize,
    n_mfcc: usize,
) -> Result<FeatureDataset, DatasetError> {
    let frames = per_clip.first().map_or(0, |(f, _)| *f);
    let mut ds = FeatureDataset::new(frames, n_mfcc, num_classes);
    for (f, samples) in per_clip {
        if f != frames {
            return Err(DatasetError::ShapeMismatch {
                expected: (frames, n_mfcc),
                found: (f, n_mfcc),
            });
        }
        for s in samples {
            ds.push(s)?;
        }
    }
    Ok(ds)
}

/// Segments every manifest clip and extracts one MFCC matrix per segment.
/// `clip_id` is the entry's position in the manifest.
pub fn build_feature_dataset(
    manifest: &Manifest,
    num_segments: usize,
    cfg: &DspConfig,
) -> Result<FeatureDataset, DatasetError> {
    let ex = MfccExtractor::<f64>::new(cfg.clone())?;
    let per_clip = ordered_map(manifest.entries.len(), worker_count(), |i| {
        let e = &manifest.entries[i];
        let clip = read_wav(&e.path).map_err(|source| DatasetError::ClipRead {
            path: e.path.display().to_string(),
            source,
        })?;
        extract_clip(&ex, &clip, e.genre, i as u32, num_segments)
    })?;
    assemble(per_clip, manifest.registry.len(), cfg.n_mfcc)
}

/// In-memory variant of [`build_feature_dataset`] over `(clip, label)` pairs.
pub fn build_from_clips(
    clips: &[(AudioClip, u32)],
    num_classes: usize,
    num_segments: usize,
    cfg: &DspConfig,
) -> Result<FeatureDataset, DatasetError> {
    let ex = MfccExtractor::<f64>::new(cfg.clone())?;
    let per_clip = ordered_map(clips.len(), worker_count(), |i| {
        let (clip, label) = &clips[i];
        extract_clip(&ex, clip, *label, i as u32, num_segments)
    })?;
    assemble(per_clip, num_classes, cfg.n_mfcc)
}
