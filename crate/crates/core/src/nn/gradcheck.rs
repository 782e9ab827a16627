//! Central finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampler::SeededRng;

use super::layers::{Activation, Layer};
use super::tensor::Tensor;

/// Step used for central differences.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so gradients that are zero on
/// both sides compare as equal.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait GradCheckable {
    fn param_count(&self) -> usize;
    fn get(&self, index: usize) -> f64;
    fn set(&mut self, index: usize, value: f64);
    /// Loss value and the on/off state of every piecewise-linear unit.
    fn evaluate(&self) -> Result<(f64, Vec<bool>)>;
    /// Analytic gradient, one entry per parameter.
    fn gradient(&self) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    /// Parameters whose perturbation flipped a ReLU; their finite
    /// difference is not a derivative and is left out.
    pub skipped_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn grad_check<M: GradCheckable + ?Sized>(model: &mut M, h: f64) -> Result<GradCheckReport> {
    let analytic = model.gradient()?;
    let (_, base_pattern) = model.evaluate()?;
    let mut report = GradCheckReport::default();
    for i in 0..model.param_count() {
        let x = model.get(i);
        model.set(i, x + h);
        let (plus, p_plus) = model.evaluate()?;
        model.set(i, x - h);
        let (minus, p_minus) = model.evaluate()?;
        model.set(i, x);
        if p_plus != base_pattern || p_minus != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

/// Locates flat index `i` across a list of tensors.
pub(crate) fn locate(lens: impl IntoIterator<Item = usize>, mut i: usize) -> (usize, usize) {
    for (t, len) in lens.into_iter().enumerate() {
        if i < len {
            return (t, i);
        }
        i -= len;
    }
    panic!("parameter index out of range");
}

/// A single layer under test: parameters are the layer's weights followed
/// by its input, and the loss is `Σ c ⊙ layer(x)` for fixed random `c`.
pub struct LayerProbe {
    pub layer: Layer,
    pub input: Tensor,
    pub upstream: Tensor,
}

impl LayerProbe {
    pub fn new(layer: Layer, input: Tensor, rng: &mut SeededRng) -> Result<Self> {
        let y = layer.forward(&input)?;
        let mut upstream = Tensor::zeros(y.shape());
        for c in upstream.data_mut() {
            *c = rng.uniform(-1.0, 1.0);
        }
        Ok(Self { layer, input, upstream })
    }

    fn lens(&self) -> Vec<usize> {
        let mut lens: Vec<usize> = self.layer.params().iter().map(|t| t.len()).collect();
        lens.push(self.input.len());
        lens
    }
}

impl GradCheckable for LayerProbe {
    fn param_count(&self) -> usize {
        self.lens().iter().sum()
    }

    fn get(&self, index: usize) -> f64 {
        let (t, j) = locate(self.lens(), index);
        match self.layer.params().get(t) {
            Some(p) => p.data()[j],
            None => self.input.data()[j],
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        let (t, j) = locate(self.lens(), index);
        let mut params = self.layer.params_mut();
        match params.get_mut(t) {
            Some(p) => p.data_mut()[j] = value,
            None => self.input.data_mut()[j] = value,
        }
    }

    fn evaluate(&self) -> Result<(f64, Vec<bool>)> {
        let y = self.layer.forward(&self.input)?;
        let loss = y.data().iter().zip(self.upstream.data()).map(|(a, b)| a * b).sum();
        let pattern = match self.layer {
            Layer::Activation(Activation::Relu) => self.input.data().iter().map(|&v| v > 0.0).collect(),
            _ => Vec::new(),
        };
        Ok((loss, pattern))
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let y = self.layer.forward(&self.input)?;
        let (gx, grads) = self.layer.backward(&self.input, &y, &self.upstream)?;
        Ok(grads.iter().chain(std::iter::once(&gx)).flat_map(|t| t.data().iter().copied()).collect())
    }
}
