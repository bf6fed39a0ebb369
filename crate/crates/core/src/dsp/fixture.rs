//! Reference-matrix fixtures: an ASCII header line
//! `MFCC-FIXTURE v1, <rows>, <cols>` followed by `rows * cols` little-endian
//! `f64` values in row-major order.

use std::fs;
use std::path::Path;

use super::{DspError, Matrix};

const TAG: &str = "MFCC-FIXTURE v1";

pub fn encode_fixture(m: &Matrix<f64>) -> Vec<u8> {
    let mut out = format!("{TAG}, {}, {}\n", m.rows, m.cols).into_bytes();
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_fixture(bytes: &[u8]) -> Result<Matrix<f64>, DspError> {
    let bad = |m: &str| DspError::BadFixture(m.to_string());
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not UTF-8"))?;
    let mut parts = header.split(',').map(str::trim);
    if parts.next() != Some(TAG) {
        return Err(bad("unknown header tag"));
    }
    let mut dim = || -> Result<usize, DspError> {
        parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| bad("malformed dimensions"))
    };
    let (rows, cols) = (dim()?, dim()?);
    let body = &bytes[nl + 1..];
    if body.len() != rows * cols * 8 {
        return Err(bad("payload length disagrees with header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Matrix::new(rows, cols, data))
}

pub fn read_fixture(path: impl AsRef<Path>) -> Result<Matrix<f64>, DspError> {
    decode_fixture(&fs::read(path)?)
}

pub fn write_fixture(m: &Matrix<f64>, path: impl AsRef<Path>) -> Result<(), DspError> {
    fs::write(path, encode_fixture(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let m = Matrix::new(2, 3, vec![1.0, -2.5, 3.0, 0.0, 1e-300, f64::MAX]);
        let bytes = encode_fixture(&m);
        assert!(bytes.starts_with(b"MFCC-FIXTURE v1, 2, 3\n"));
        assert_eq!(decode_fixture(&bytes).unwrap(), m);
    }

    #[test]
    fn short_payload_rejected() {
        let mut bytes = encode_fixture(&Matrix::new(1, 2, vec![1.0, 2.0]));
        bytes.pop();
        assert!(decode_fixture(&bytes).is_err());
    }
}
