use super::{softmax_cross_entropy, Adam, Layer, LayerConfig, Mode, NnError, Param, Tensor};
use crate::rng::SeededRng;
use crate::Scalar;

/// Stream ids: weight init uses stream 0; layer `i` owns stream `1000 + i`.
const LAYER_STREAM_BASE: u64 = 1000;

/// Linear stack of layers over a fixed per-sample input shape.
pub struct Sequential<T: Scalar> {
    input_shape: Vec<usize>,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> std::fmt::Debug for Sequential<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sequential")
            .field("input_shape", &self.input_shape)
            .field("layers", &self.configs())
            .finish()
    }
}

impl<T: Scalar> Sequential<T> {
    /// Builds and shape-checks a stack. Weight initialization and every
    /// layer-owned random stream are derived from `seed`.
    pub fn from_configs(input_shape: Vec<usize>, configs: &[LayerConfig], seed: u64) -> Result<Self, NnError> {
        let mut init = SeededRng::with_stream(seed, 0);
        let layers = configs
            .iter()
            .enumerate()
            .map(|(i, c)| c.build(&mut init, SeededRng::with_stream(seed, LAYER_STREAM_BASE + i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let net = Self { input_shape, layers };
        net.trace_shapes()?;
        Ok(net)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn configs(&self) -> Vec<LayerConfig> {
        self.layers.iter().map(|l| l.config()).collect()
    }

    pub fn layers(&self) -> &[Box<dyn Layer<T>>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer<T>>] {
        &mut self.layers
    }

    /// Per-sample shape after every layer, starting with the input.
    pub fn trace_shapes(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = vec![self.input_shape.clone()];
        for l in &self.layers {
            let next = l.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        Ok(self.trace_shapes()?.pop().unwrap())
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// `(layer index, layer kind, parameter)` for every parameter.
    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.params().into_iter().map(move |p| (format!("{i}.{}", p.name), p)))
            .collect()
    }

    pub fn named_buffers(&self) -> Vec<(String, &Tensor<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.buffers().into_iter().map(move |(n, t)| (format!("{i}.{n}"), t)))
            .collect()
    }

    fn has_softmax_head(&self) -> bool {
        matches!(self.layers.last().map(|l| l.config()), Some(LayerConfig::Softmax))
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.rank() == 0 || x.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![x.batch()];
            expected.extend_from_slice(&self.input_shape);
            return Err(NnError::Shape {
                context: "model input",
                expected,
                found: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Full forward pass, including the softmax head when present.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Forward pass stopping before a trailing softmax.
    pub fn logits(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let stop = self.layers.len() - usize::from(self.has_softmax_head());
        let mut h = x.clone();
        for l in &mut self.layers[..stop] {
            h = l.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Backpropagates a gradient with respect to the logits.
    pub fn backward_from_logits(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let stop = self.layers.len() - usize::from(self.has_softmax_head());
        let mut g = grad.clone();
        for l in self.layers[..stop].iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    /// One optimization step on a batch; returns the batch loss.
    pub fn train_batch(&mut self, x: &Tensor<T>, labels: &[usize], optimizer: &mut Adam<T>) -> Result<T, NnError> {
        let logits = self.logits(x, Mode::Train)?;
        let (loss, _, grad) = softmax_cross_entropy(&logits, labels)?;
        self.backward_from_logits(&grad)?;
        optimizer.step(&mut self.params_mut());
        Ok(loss)
    }

    /// Copies parameters and buffers in order from a model whose parametric
    /// layers have identical shapes (layers without state may differ).
    pub fn copy_state_from(&mut self, other: &Sequential<T>) -> Result<(), NnError> {
        let src: Vec<&Param<T>> = other.params();
        let mut dst = self.params_mut();
        if src.len() != dst.len() {
            return Err(NnError::Checkpoint(format!(
                "{} parameters vs {}",
                dst.len(),
                src.len()
            )));
        }
        for (d, s) in dst.iter_mut().zip(&src) {
            d.value.expect_shape("parameter copy", s.value.shape())?;
            d.value = s.value.clone();
        }
        let src_buf: Vec<Tensor<T>> = other
            .layers
            .iter()
            .flat_map(|l| l.buffers())
            .map(|(_, t)| t.clone())
            .collect();
        let mut dst_buf: Vec<&mut Tensor<T>> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.buffers_mut())
            .map(|(_, t)| t)
            .collect();
        if src_buf.len() != dst_buf.len() {
            return Err(NnError::Checkpoint("buffer count differs".into()));
        }
        for (d, s) in dst_buf.iter_mut().zip(src_buf) {
            d.expect_shape("buffer copy", s.shape())?;
            **d = s;
        }
        Ok(())
    }
}
