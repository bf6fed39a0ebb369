//! Binary feature file.
//!
//! ```text
//! "KMGRFEAT"                       8-byte magic
//! u32 version (= 1)
//! u32 frames, u32 n_mfcc, u32 num_classes
//! u64 sample count
//! per sample: u32 label, u32 clip_id, u32 segment_index,
//!             frames * n_mfcc f32 values (row-major)
//! u32 CRC-32 of every byte between the magic and the checksum
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{DatasetError, FeatureDataset, Sample};

const MAGIC: &[u8; 8] = b"KMGRFEAT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 * 3 + 8;

pub fn encode_features(ds: &FeatureDataset) -> Vec<u8> {
    let per = ds.frames * ds.n_mfcc;
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (12 + 4 * per) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [ds.frames, ds.n_mfcc, ds.num_classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for s in &ds.samples {
        for v in [s.label, s.clip_id, s.segment_index] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &s.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[MAGIC.len()..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureDataset, DatasetError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(DatasetError::Truncated {
            expected: (HEADER_LEN + 4) as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(DatasetError::VersionMismatch(version));
    }
    let frames = u32_at(bytes, 12) as usize;
    let n_mfcc = u32_at(bytes, 16) as usize;
    let num_classes = u32_at(bytes, 20) as usize;
    let count = u64::from_le_bytes(bytes[24..32].try_into().unwrap());

    let per = (frames as u64) * (n_mfcc as u64);
    let expected = count
        .checked_mul(12 + 4 * per)
        .and_then(|b| b.checked_add(HEADER_LEN as u64 + 4))
        .unwrap_or(u64::MAX);
    if (bytes.len() as u64) < expected {
        return Err(DatasetError::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 != expected {
        return Err(DatasetError::Checksum);
    }
    let body_end = bytes.len() - 4;
    let stored = u32_at(bytes, body_end);
    if crc32fast::hash(&bytes[MAGIC.len()..body_end]) != stored {
        return Err(DatasetError::Checksum);
    }

    let mut ds = FeatureDataset::new(frames, n_mfcc, num_classes);
    ds.samples.reserve(count as usize);
    let mut pos = HEADER_LEN;
    let per = per as usize;
    for _ in 0..count {
        let (label, clip_id, segment_index) = (u32_at(bytes, pos), u32_at(bytes, pos + 4), u32_at(bytes, pos + 8));
        pos += 12;
        let values = bytes[pos..pos + 4 * per]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        pos += 4 * per;
        ds.push(Sample {
            values,
            label,
            clip_id,
            segment_index,
        })?;
    }
    Ok(ds)
}

pub fn save_features(ds: &FeatureDataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    fs::write(path, encode_features(ds))?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureDataset, DatasetError> {
    decode_features(&fs::read(path)?)
}
