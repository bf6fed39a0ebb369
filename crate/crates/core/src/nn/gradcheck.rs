//! Central finite-difference verification of hand-written backward passes.
//!
//! A layer is checked against the scalar probe `L(x) = sum(R * layer(x))` for
//! a seeded Gaussian `R`, so the analytic input gradient is `backward(R)`.
//! Each coordinate's numeric derivative is `(L(x + h) - L(x - h)) / 2h` and the
//! error is `|a - n| / max(|a|, |n|, 1e-8)`.

use serde::Serialize;

use super::{
    softmax_cross_entropy, BatchNorm2d, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2d, Mode, NnError, Relu, Tensor,
};
use crate::rng::SeededRng;

/// Names accepted by [`check_named_layer`], in reporting order.
pub const LAYER_NAMES: [&str; 8] = [
    "dense",
    "relu",
    "softmax_ce",
    "dropout",
    "conv2d",
    "maxpool2d",
    "batchnorm2d",
    "flatten",
];

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates per tensor beyond which a random subset is checked.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_coords: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorError {
    pub name: String,
    pub max_rel_err: f64,
    pub checked: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub layer: String,
    pub tolerance: f64,
    pub seeds: usize,
    pub tensors: Vec<TensorError>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= self.tolerance
    }

    /// Folds another run of the same layer into this report (worst case wins).
    pub fn merge(&mut self, other: GradCheckReport) {
        self.seeds += other.seeds;
        for t in other.tensors {
            match self.tensors.iter_mut().find(|s| s.name == t.name) {
                Some(s) => {
                    s.max_rel_err = s.max_rel_err.max(t.max_rel_err);
                    s.checked += t.checked;
                    s.excluded += t.excluded;
                }
                None => self.tensors.push(t),
            }
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn sample_coords(len: usize, max: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    if len > max {
        rng.shuffle(&mut idx);
        idx.truncate(max);
        idx.sort_unstable();
    }
    idx
}

fn probe(layer: &mut dyn Layer<f64>, x: &Tensor<f64>, mode: Mode, r: &Tensor<f64>) -> Result<f64, NnError> {
    let y = layer.forward(x, mode)?;
    Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
}

/// Checks input and parameter gradients of one layer.
pub fn grad_check(
    layer: &mut dyn Layer<f64>,
    input: &Tensor<f64>,
    mode: Mode,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let mut rng = SeededRng::with_stream(cfg.seed, 77);
    let y = layer.forward(input, mode)?;
    let r = Tensor::from_fn(y.shape().to_vec(), |_| rng.normal());
    let dx = layer.backward(&r)?;
    let param_grads: Vec<(String, Tensor<f64>)> = layer
        .params()
        .iter()
        .map(|p| (p.name.to_string(), p.grad.clone()))
        .collect();
    let h = cfg.step;

    let mut tensors = Vec::new();
    let mut x = input.clone();
    let mut entry = TensorError {
        name: "input".into(),
        max_rel_err: 0.0,
        checked: 0,
        excluded: 0,
    };
    for i in sample_coords(x.len(), cfg.max_coords, &mut rng) {
        if layer.nondifferentiable_at(input, i, h) {
            entry.excluded += 1;
            continue;
        }
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = probe(layer, &x, mode, &r)?;
        x.data_mut()[i] = orig - h;
        let minus = probe(layer, &x, mode, &r)?;
        x.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        entry.max_rel_err = entry.max_rel_err.max(relative_error(dx.data()[i], numeric));
        entry.checked += 1;
    }
    tensors.push(entry);

    for (p_idx, (name, grad)) in param_grads.iter().enumerate() {
        let mut entry = TensorError {
            name: name.clone(),
            max_rel_err: 0.0,
            checked: 0,
            excluded: 0,
        };
        for i in sample_coords(grad.len(), cfg.max_coords, &mut rng) {
            let orig = layer.params()[p_idx].value.data()[i];
            layer.params_mut()[p_idx].value.data_mut()[i] = orig + h;
            let plus = probe(layer, input, mode, &r)?;
            layer.params_mut()[p_idx].value.data_mut()[i] = orig - h;
            let minus = probe(layer, input, mode, &r)?;
            layer.params_mut()[p_idx].value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            entry.max_rel_err = entry.max_rel_err.max(relative_error(grad.data()[i], numeric));
            entry.checked += 1;
        }
        tensors.push(entry);
    }
    Ok(GradCheckReport {
        layer: format!("{:?}", layer.config()),
        tolerance: cfg.tolerance,
        seeds: 1,
        tensors,
    })
}

/// Checks the fused softmax + cross-entropy gradient with respect to logits.
pub fn grad_check_softmax_ce(
    logits: &Tensor<f64>,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let (_, _, grad) = softmax_cross_entropy(logits, labels)?;
    let h = cfg.step;
    let mut rng = SeededRng::with_stream(cfg.seed, 78);
    let mut x = logits.clone();
    let mut entry = TensorError {
        name: "logits".into(),
        max_rel_err: 0.0,
        checked: 0,
        excluded: 0,
    };
    for i in sample_coords(x.len(), cfg.max_coords, &mut rng) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = softmax_cross_entropy(&x, labels)?.0;
        x.data_mut()[i] = orig - h;
        let minus = softmax_cross_entropy(&x, labels)?.0;
        x.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        entry.max_rel_err = entry.max_rel_err.max(relative_error(grad.data()[i], numeric));
        entry.checked += 1;
    }
    Ok(GradCheckReport {
        layer: "softmax_ce".into(),
        tolerance: cfg.tolerance,
        seeds: 1,
        tensors: vec![entry],
    })
}

fn gaussian(shape: Vec<usize>, rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn randomize_params(layer: &mut dyn Layer<f64>, rng: &mut SeededRng) {
    for p in layer.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.normal() * 0.5 + if p.name == "gamma" { 1.0 } else { 0.0 };
        }
    }
}

/// Runs the standard randomized instance of one layer type for one seed.
pub fn check_named_layer(name: &str, cfg: &GradCheckConfig) -> Result<GradCheckReport, NnError> {
    let mut rng = SeededRng::with_stream(cfg.seed, 79);
    let mut report = match name {
        "dense" => {
            let mut l = Dense::<f64>::new(7, 5, &mut rng)?;
            randomize_params(&mut l, &mut rng);
            grad_check(&mut l, &gaussian(vec![4, 7], &mut rng), Mode::Train, cfg)?
        }
        "relu" => grad_check(&mut Relu::new(), &gaussian(vec![4, 9], &mut rng), Mode::Train, cfg)?,
        "softmax_ce" => {
            let logits = gaussian(vec![4, 8], &mut rng).map(|v| v * 2.0);
            let labels: Vec<usize> = (0..4).map(|_| rng.below(8) as usize).collect();
            grad_check_softmax_ce(&logits, &labels, cfg)?
        }
        "dropout" => {
            let mut l = Dropout::<f64>::new(0.3, SeededRng::with_stream(cfg.seed, 80))?;
            l.set_frozen(true);
            let x = gaussian(vec![4, 10], &mut rng);
            l.forward(&x, Mode::Train)?;
            grad_check(&mut l, &x, Mode::Train, cfg)?
        }
        "conv2d" => {
            // alternate odd and even kernels so both padding layouts are covered
            let kernel = if cfg.seed.is_multiple_of(2) { [3, 3] } else { [2, 2] };
            let mut l = Conv2d::<f64>::new(kernel, 3, 4, &mut rng)?;
            randomize_params(&mut l, &mut rng);
            grad_check(&mut l, &gaussian(vec![2, 6, 5, 3], &mut rng), Mode::Train, cfg)?
        }
        "maxpool2d" => {
            let mut l = MaxPool2d::new([3, 3], [2, 2])?;
            grad_check(&mut l, &gaussian(vec![2, 7, 6, 3], &mut rng), Mode::Train, cfg)?
        }
        "batchnorm2d" => {
            let mut l = BatchNorm2d::<f64>::new(2, 1e-3, 0.99)?;
            randomize_params(&mut l, &mut rng);
            grad_check(&mut l, &gaussian(vec![4, 3, 3, 2], &mut rng), Mode::Train, cfg)?
        }
        "flatten" => grad_check(
            &mut Flatten::new(),
            &gaussian(vec![2, 3, 4, 1], &mut rng),
            Mode::Train,
            cfg,
        )?,
        other => return Err(NnError::InvalidConfig(format!("unknown layer {other:?}"))),
    };
    report.layer = name.to_string();
    Ok(report)
}

/// Checks one layer across `seeds` independent random instances.
pub fn check_layer_over_seeds(name: &str, seeds: u64, base: &GradCheckConfig) -> Result<GradCheckReport, NnError> {
    let mut merged: Option<GradCheckReport> = None;
    for s in 0..seeds {
        let cfg = GradCheckConfig {
            seed: base.seed.wrapping_add(s),
            ..*base
        };
        let r = check_named_layer(name, &cfg)?;
        match merged.as_mut() {
            Some(m) => m.merge(r),
            None => merged = Some(r),
        }
    }
    merged.ok_or_else(|| NnError::InvalidConfig("need at least one seed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerConfig;

    /// Dense layer whose backward pass has the wrong sign.
    struct Flipped(Dense<f64>);

    impl Layer<f64> for Flipped {
        fn config(&self) -> LayerConfig {
            self.0.config()
        }
        fn forward(&mut self, x: &Tensor<f64>, mode: Mode) -> Result<Tensor<f64>, NnError> {
            self.0.forward(x, mode)
        }
        fn backward(&mut self, g: &Tensor<f64>) -> Result<Tensor<f64>, NnError> {
            Ok(self.0.backward(g)?.map(|v| -v))
        }
        fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
            self.0.output_shape(input)
        }
    }

    #[test]
    fn every_layer_passes_one_seed() {
        let cfg = GradCheckConfig::default();
        for name in LAYER_NAMES {
            let r = check_named_layer(name, &cfg).unwrap();
            assert!(r.passed(), "{name}: {}", r.max_rel_err());
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        let mut rng = SeededRng::new(3);
        let mut l = Flipped(Dense::new(6, 4, &mut rng).unwrap());
        let x = gaussian(vec![3, 6], &mut rng);
        let r = grad_check(&mut l, &x, Mode::Train, &GradCheckConfig::default()).unwrap();
        assert!((r.tensors[0].max_rel_err - 2.0).abs() < 1e-6);
        assert!(!r.passed());
    }

    #[test]
    fn relu_kink_is_excluded() {
        let x = Tensor::new(vec![1, 4], vec![0.0, 1.0, -2.0, 0.0]).unwrap();
        let r = grad_check(&mut Relu::new(), &x, Mode::Train, &GradCheckConfig::default()).unwrap();
        assert_eq!(r.tensors[0].excluded, 2);
        assert_eq!(r.tensors[0].checked, 2);
        assert!(r.passed());
    }

    #[test]
    fn unknown_layer_name() {
        assert!(check_named_layer("lstm", &GradCheckConfig::default()).is_err());
    }
}
