use super::{Layer, LayerConfig, Mode, NnError, Tensor};
use crate::Scalar;

/// Max pooling with same padding: output dims are `ceil(in / stride)` and the
/// padded cells never win. Ties resolve to the first position in row-major
/// window order, which is also where the gradient is routed.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pool: [usize; 2],
    strides: [usize; 2],
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Output length and leading pad for one axis.
fn same_geometry(len: usize, pool: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + pool).saturating_sub(len);
    (out, total / 2)
}

impl MaxPool2d {
    pub fn new(pool: [usize; 2], strides: [usize; 2]) -> Result<Self, NnError> {
        if pool.contains(&0) || strides.contains(&0) {
            return Err(NnError::InvalidConfig("pool and strides must be positive".into()));
        }
        Ok(Self {
            pool,
            strides,
            cache: None,
        })
    }
}

impl<T: Scalar> Layer<T> for MaxPool2d {
    fn config(&self) -> LayerConfig {
        LayerConfig::MaxPool2d {
            pool: self.pool,
            strides: self.strides,
        }
    }

    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>, NnError> {
        let [b, h, w, c]: [usize; 4] = x.shape().try_into().map_err(|_| NnError::Shape {
            context: "maxpool2d input (batch, h, w, channels)",
            expected: vec![0, 0, 0, 0],
            found: x.shape().to_vec(),
        })?;
        let (oh, top) = same_geometry(h, self.pool[0], self.strides[0]);
        let (ow, left) = same_geometry(w, self.pool[1], self.strides[1]);
        let src = x.data();
        let mut out = vec![T::neg_infinity(); b * oh * ow * c];
        let mut argmax = vec![usize::MAX; out.len()];
        for n in 0..b {
            for i in 0..oh {
                for j in 0..ow {
                    let o = ((n * oh + i) * ow + j) * c;
                    for di in 0..self.pool[0] {
                        let Some(y) = (i * self.strides[0] + di).checked_sub(top).filter(|&y| y < h) else {
                            continue;
                        };
                        for dj in 0..self.pool[1] {
                            let Some(xx) = (j * self.strides[1] + dj).checked_sub(left).filter(|&v| v < w) else {
                                continue;
                            };
                            let base = ((n * h + y) * w + xx) * c;
                            for ch in 0..c {
                                let v = src[base + ch];
                                if argmax[o + ch] == usize::MAX || v > out[o + ch] {
                                    out[o + ch] = v;
                                    argmax[o + ch] = base + ch;
                                }
                            }
                        }
                    }
                }
            }
        }
        let output_shape = vec![b, oh, ow, c];
        self.cache = Some(PoolCache {
            input_shape: x.shape().to_vec(),
            output_shape: output_shape.clone(),
            argmax,
        });
        Tensor::new(output_shape, out)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let cache = self
            .cache
            .as_ref()
            .ok_or(NnError::NoForwardCache("maxpool2d backward"))?;
        grad_out.expect_shape("maxpool2d gradient", &cache.output_shape)?;
        let mut dx = Tensor::zeros(cache.input_shape.clone());
        let d = dx.data_mut();
        for (&src, &g) in cache.argmax.iter().zip(grad_out.data()) {
            d[src] += g;
        }
        Ok(dx)
    }

    /// True when a step of `step` could move the argmax of a window holding `index`.
    fn nondifferentiable_at(&self, input: &Tensor<T>, index: usize, step: T) -> bool {
        let [_, h, w, c]: [usize; 4] = match input.shape().try_into() {
            Ok(s) => s,
            Err(_) => return false,
        };
        let (oh, top) = same_geometry(h, self.pool[0], self.strides[0]);
        let (ow, left) = same_geometry(w, self.pool[1], self.strides[1]);
        let src = input.data();
        let (ch, xx, y, n) = (index % c, index / c % w, index / (c * w) % h, index / (c * w * h));
        let covering = |pos: usize, len: usize, pad: usize, pool: usize, stride: usize| {
            (0..len).filter(move |&o| {
                let start = o * stride;
                start <= pos + pad && pos + pad < start + pool
            })
        };
        let v = src[index];
        for i in covering(y, oh, top, self.pool[0], self.strides[0]) {
            for j in covering(xx, ow, left, self.pool[1], self.strides[1]) {
                let mut rival = T::neg_infinity();
                for di in 0..self.pool[0] {
                    let Some(yy) = (i * self.strides[0] + di).checked_sub(top).filter(|&v| v < h) else {
                        continue;
                    };
                    for dj in 0..self.pool[1] {
                        let Some(x2) = (j * self.strides[1] + dj).checked_sub(left).filter(|&v| v < w) else {
                            continue;
                        };
                        let k = ((n * h + yy) * w + x2) * c + ch;
                        if k != index {
                            rival = rival.max(src[k]);
                        }
                    }
                }
                if (v - rival).abs() <= step {
                    return true;
                }
            }
        }
        false
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match input {
            [h, w, c] if *h > 0 && *w > 0 => Ok(vec![h.div_ceil(self.strides[0]), w.div_ceil(self.strides[1]), *c]),
            _ => Err(NnError::Shape {
                context: "maxpool2d input (h, w, channels)",
                expected: vec![1, 1, 1],
                found: input.to_vec(),
            }),
        }
    }
}
