use super::{glorot_limit, Layer, LayerConfig, Mode, NnError, Param, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Stride-1 2-D cross-correlation with same zero padding, lowered to a
/// matrix product over an im2col buffer.
///
/// Kernels are `(kh, kw, in_channels, filters)`. For even kernel sizes the
/// extra padding row/column goes at the bottom/right.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    kernel: [usize; 2],
    in_channels: usize,
    filters: usize,
    weight: Param<T>,
    bias: Param<T>,
    cache: Option<ConvCache<T>>,
}

#[derive(Debug, Clone)]
struct ConvCache<T> {
    input_shape: [usize; 4],
    cols: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(kernel: [usize; 2], in_channels: usize, filters: usize, init: &mut SeededRng) -> Result<Self, NnError> {
        if kernel.contains(&0) || in_channels == 0 || filters == 0 {
            return Err(NnError::InvalidConfig("conv2d sizes must be positive".into()));
        }
        let area = kernel[0] * kernel[1];
        let limit = glorot_limit(area * in_channels, area * filters);
        let w = Tensor::from_fn(vec![kernel[0], kernel[1], in_channels, filters], |_| {
            T::lit(init.uniform_range(-limit, limit))
        });
        Ok(Self::from_parts(w, Tensor::zeros(vec![filters])))
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        let s = weight.shape();
        let (kernel, in_channels, filters) = ([s[0], s[1]], s[2], s[3]);
        Self {
            kernel,
            in_channels,
            filters,
            weight: Param::new("kernel", weight),
            bias: Param::new("bias", bias),
            cache: None,
        }
    }

    fn patch_len(&self) -> usize {
        self.kernel[0] * self.kernel[1] * self.in_channels
    }

    fn pads(&self) -> (usize, usize) {
        ((self.kernel[0] - 1) / 2, (self.kernel[1] - 1) / 2)
    }

    fn im2col(&self, x: &Tensor<T>, [b, h, w, c]: [usize; 4]) -> Vec<T> {
        let [kh, kw] = self.kernel;
        let (top, left) = self.pads();
        let patch = self.patch_len();
        let mut cols = vec![T::zero(); b * h * w * patch];
        let src = x.data();
        for n in 0..b {
            for i in 0..h {
                for j in 0..w {
                    let row = ((n * h + i) * w + j) * patch;
                    for di in 0..kh {
                        let Some(y) = (i + di).checked_sub(top).filter(|&y| y < h) else {
                            continue;
                        };
                        for dj in 0..kw {
                            let Some(xx) = (j + dj).checked_sub(left).filter(|&v| v < w) else {
                                continue;
                            };
                            let from = ((n * h + y) * w + xx) * c;
                            let to = row + (di * kw + dj) * c;
                            cols[to..to + c].copy_from_slice(&src[from..from + c]);
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[T], [b, h, w, c]: [usize; 4]) -> Vec<T> {
        let [kh, kw] = self.kernel;
        let (top, left) = self.pads();
        let patch = self.patch_len();
        let mut dx = vec![T::zero(); b * h * w * c];
        for n in 0..b {
            for i in 0..h {
                for j in 0..w {
                    let row = ((n * h + i) * w + j) * patch;
                    for di in 0..kh {
                        let Some(y) = (i + di).checked_sub(top).filter(|&y| y < h) else {
                            continue;
                        };
                        for dj in 0..kw {
                            let Some(xx) = (j + dj).checked_sub(left).filter(|&v| v < w) else {
                                continue;
                            };
                            let to = ((n * h + y) * w + xx) * c;
                            let from = row + (di * kw + dj) * c;
                            for (d, &g) in dx[to..to + c].iter_mut().zip(&dcols[from..from + c]) {
                                *d += g;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

fn as4(shape: &[usize]) -> Option<[usize; 4]> {
    shape.try_into().ok()
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn config(&self) -> LayerConfig {
        LayerConfig::Conv2d {
            kernel: self.kernel,
            in_channels: self.in_channels,
            filters: self.filters,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        let dims = as4(x.shape())
            .filter(|d| d[3] == self.in_channels)
            .ok_or_else(|| NnError::Shape {
                context: "conv2d input (batch, h, w, channels)",
                expected: vec![x.batch(), 0, 0, self.in_channels],
                found: x.shape().to_vec(),
            })?;
        let [b, h, w, _] = dims;
        let rows = b * h * w;
        let cols = self.im2col(x, dims);
        let mut y = Vec::with_capacity(rows * self.filters);
        for _ in 0..rows {
            y.extend_from_slice(self.bias.value.data());
        }
        T::gemm(
            rows,
            self.patch_len(),
            self.filters,
            &cols,
            false,
            self.weight.value.data(),
            false,
            T::one(),
            &mut y,
        );
        self.cache = Some(ConvCache {
            input_shape: dims,
            cols,
        });
        Tensor::new(vec![b, h, w, self.filters], y)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache("conv2d backward"))?;
        let [b, h, w, c] = cache.input_shape;
        grad_out.expect_shape("conv2d gradient", &[b, h, w, self.filters])?;
        let rows = b * h * w;
        let patch = self.patch_len();
        let g = grad_out.data();
        T::gemm(
            patch,
            rows,
            self.filters,
            &cache.cols,
            true,
            g,
            false,
            T::zero(),
            self.weight.grad.data_mut(),
        );
        let db = self.bias.grad.data_mut();
        db.fill(T::zero());
        for row in g.chunks_exact(self.filters) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dcols = vec![T::zero(); rows * patch];
        T::gemm(
            rows,
            self.filters,
            patch,
            g,
            false,
            self.weight.value.data(),
            true,
            T::zero(),
            &mut dcols,
        );
        let dx = self.col2im(&dcols, cache.input_shape);
        Tensor::new(vec![b, h, w, c], dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match input {
            [h, w, c] if *c == self.in_channels && *h > 0 && *w > 0 => Ok(vec![*h, *w, self.filters]),
            _ => Err(NnError::Shape {
                context: "conv2d input (h, w, channels)",
                expected: vec![0, 0, self.in_channels],
                found: input.to_vec(),
            }),
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_kernel_is_identity() {
        let mut conv = Conv2d::<f64>::from_parts(Tensor::filled(vec![1, 1, 1, 1], 1.0), Tensor::zeros(vec![1]));
        let x = Tensor::from_fn(vec![2, 4, 3, 1], |i| i as f64 - 5.0);
        assert_eq!(conv.forward(&x, Mode::Train).unwrap(), x);
    }

    #[test]
    fn ones_kernel_on_one_hot() {
        let mut conv = Conv2d::<f64>::from_parts(Tensor::filled(vec![3, 3, 1, 1], 1.0), Tensor::zeros(vec![1]));
        for (hot_r, hot_c) in [(2usize, 2usize), (0, 0), (4, 3)] {
            let x = Tensor::from_fn(vec![1, 5, 5, 1], |i| if i == hot_r * 5 + hot_c { 1.0 } else { 0.0 });
            let y = conv.forward(&x, Mode::Train).unwrap();
            for r in 0..5usize {
                for c in 0..5usize {
                    let near = r.abs_diff(hot_r) <= 1 && c.abs_diff(hot_c) <= 1;
                    assert_eq!(y.data()[r * 5 + c], if near { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn even_kernel_pads_bottom_right() {
        // 2x2 ones kernel: output (i, j) sums x[i..=i+1, j..=j+1]
        let mut conv = Conv2d::<f64>::from_parts(Tensor::filled(vec![2, 2, 1, 1], 1.0), Tensor::zeros(vec![1]));
        let x = Tensor::from_fn(vec![1, 2, 2, 1], |i| (i + 1) as f64);
        let y = conv.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[10.0, 6.0, 7.0, 4.0]);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let mut conv = Conv2d::<f32>::new([3, 3], 2, 4, &mut SeededRng::new(0)).unwrap();
        assert!(conv.forward(&Tensor::zeros(vec![1, 4, 4, 3]), Mode::Train).is_err());
    }

    proptest! {
        #[test]
        fn same_padding_preserves_spatial_dims(
            b in 1usize..3, h in 1usize..9, w in 1usize..9, cin in 1usize..4,
            cout in 1usize..4, kh in 1usize..4, kw in 1usize..4,
        ) {
            let mut conv = Conv2d::<f64>::new([kh, kw], cin, cout, &mut SeededRng::new(1)).unwrap();
            let y = conv.forward(&Tensor::zeros(vec![b, h, w, cin]), Mode::Train).unwrap();
            prop_assert_eq!(y.shape(), &[b, h, w, cout]);
        }
    }
}
