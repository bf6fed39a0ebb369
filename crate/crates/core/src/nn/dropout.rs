use super::{Layer, LayerConfig, Mode, NnError, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Inverted dropout: in training each unit is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`; inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    rate: f64,
    rng: SeededRng,
    mask: Option<(Vec<usize>, Vec<T>)>,
    last_mode: Mode,
    frozen: bool,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64, rng: SeededRng) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidConfig(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(Self {
            rate,
            rng,
            mask: None,
            last_mode: Mode::Inference,
            frozen: false,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// While frozen, training passes reuse the current mask when its shape
    /// matches instead of drawing a new one.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn draw_mask(&mut self, n: usize) -> Vec<T> {
        let keep = T::lit(1.0 / (1.0 - self.rate));
        (0..n)
            .map(|_| {
                if self.rng.uniform() >= self.rate {
                    keep
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

impl<T: Scalar> Layer<T> for Dropout<T> {
    fn config(&self) -> LayerConfig {
        LayerConfig::Dropout { rate: self.rate }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        self.last_mode = mode;
        if mode == Mode::Inference || self.rate == 0.0 {
            return Ok(x.clone());
        }
        let reuse = self.frozen && matches!(&self.mask, Some((s, _)) if s == x.shape());
        if !reuse {
            let m = self.draw_mask(x.len());
            self.mask = Some((x.shape().to_vec(), m));
        }
        let (_, mask) = self.mask.as_ref().expect("mask drawn above");
        let data = x.data().iter().zip(mask).map(|(&v, &m)| v * m).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if self.last_mode == Mode::Inference || self.rate == 0.0 {
            return Ok(grad_out.clone());
        }
        let (shape, mask) = self.mask.as_ref().ok_or(NnError::NoForwardCache("dropout backward"))?;
        grad_out.expect_shape("dropout gradient", shape)?;
        let data = grad_out.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
        Tensor::new(shape.clone(), data)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        Ok(input.to_vec())
    }
}
