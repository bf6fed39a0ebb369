use num_complex::Complex;

use super::DspError;
use crate::Scalar;

/// Precomputed iterative radix-2 transform of one power-of-two length.
#[derive(Debug, Clone)]
pub struct Radix2Fft<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    bit_rev: Vec<usize>,
}

impl<T: Scalar> Radix2Fft<T> {
    pub fn new(n: usize) -> Result<Self, DspError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(DspError::NotPowerOfTwo(n));
        }
        let twiddles = (0..n / 2)
            .map(|k| {
                let theta = -std::f64::consts::TAU * k as f64 / n as f64;
                Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bit_rev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Self { n, twiddles, bit_rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform; the inverse includes the `1/N` scale.
    pub fn process(&self, buf: &mut [Complex<T>], inverse: bool) {
        assert_eq!(buf.len(), self.n, "buffer length differs from plan length");
        let n = self.n;
        for i in 0..n {
            let j = self.bit_rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for j in 0..half {
                    let mut w = self.twiddles[j * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            size *= 2;
        }
        if inverse {
            let scale = T::one() / T::from_usize(n).unwrap();
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// One-shot transform of a power-of-two length signal.
pub fn fft<T: Scalar>(signal: &[Complex<T>], inverse: bool) -> Result<Vec<Complex<T>>, DspError> {
    let plan = Radix2Fft::new(signal.len())?;
    let mut buf = signal.to_vec();
    plan.process(&mut buf, inverse);
    Ok(buf)
}

/// `O(N^2)` DFT by direct summation, any length. Reference for tests.
pub fn naive_dft(signal: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = signal.len();
    (0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .map(|(t, x)| {
                    // reduce k*t mod n first to keep the angle small
                    let theta = -std::f64::consts::TAU * ((k * t) % n) as f64 / n as f64;
                    x * Complex::new(theta.cos(), theta.sin())
                })
                .sum()
        })
        .collect()
}
