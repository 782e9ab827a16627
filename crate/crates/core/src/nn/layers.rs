//! Layers with explicit forward and backward passes over NCHW / (N, F)
//! tensors. Every loop runs in a fixed order, so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::sampler::SeededRng;

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out, in, k, k]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

/// Non-overlapping average pooling; trailing rows/columns that do not fill
/// a window are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvgPool2d {
    pub kernel: usize,
}

/// Average pooling to a fixed output size. Bin `i` covers input rows
/// `floor(i H / h_out) .. ceil((i + 1) H / h_out)`, so bins may overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdaptiveAvgPool2d {
    pub out_height: usize,
    pub out_width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    Linear(Linear),
    Activation(Activation),
    AvgPool(AvgPool2d),
    AdaptiveAvgPool(AdaptiveAvgPool2d),
    Flatten,
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut SeededRng, fan_in: usize, fan_out: usize, shape: &[usize]) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for w in t.data_mut() {
        *w = rng.uniform(-limit, limit);
    }
    t
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize, rng: &mut SeededRng) -> Self {
        let k2 = kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: glorot_uniform(rng, in_channels * k2, out_channels * k2, &[out_channels, in_channels, kernel, kernel]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if self.stride == 0 || self.kernel == 0 || hp < self.kernel || wp < self.kernel {
            return Err(Error::ShapeMismatch(format!(
                "{h}x{w} input too small for kernel {} with padding {}",
                self.kernel, self.padding
            )));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels {
            return Err(Error::ShapeMismatch(format!("conv expects {} channels, got {c}", self.in_channels)));
        }
        let (oh, ow) = self.output_size(h, w)?;
        Ok((n, h, w, oh, ow))
    }

    /// Outputs `lo..hi` whose input coordinate `o * stride + tap - padding`
    /// falls inside `0..size`, and the input coordinate of `lo`.
    #[inline]
    fn span(&self, tap: usize, size: usize, out: usize) -> (usize, usize, usize) {
        let (s, p) = (self.stride, self.padding);
        let lo = if p > tap { (p - tap).div_ceil(s) } else { 0 };
        let hi = if size + p > tap { ((size + p - tap - 1) / s + 1).min(out) } else { 0 };
        if lo >= hi {
            return (0, 0, 0);
        }
        (lo, hi, lo * s + tap - p)
    }

    /// Unfolds image `b` into rows `(ic, ky, kx)` by output pixel, zero
    /// where the kernel overlaps the padding.
    fn im2col(&self, xd: &[f64], b: usize, h: usize, w: usize, oh: usize, ow: usize, cols: &mut [f64]) {
        let (ci, k, s) = (self.in_channels, self.kernel, self.stride);
        cols.fill(0.0);
        for ic in 0..ci {
            let xin = &xd[(b * ci + ic) * h * w..(b * ci + ic + 1) * h * w];
            for ky in 0..k {
                let (y0, y1, iy0) = self.span(ky, h, oh);
                for kx in 0..k {
                    let (x0, x1, ix0) = self.span(kx, w, ow);
                    let row = &mut cols[((ic * k + ky) * k + kx) * oh * ow..][..oh * ow];
                    for (oy, iy) in (y0..y1).zip((iy0..).step_by(s)) {
                        let src = &xin[iy * w..(iy + 1) * w];
                        for (ox, d) in (x0..x1).zip(row[oy * ow + x0..oy * ow + x1].iter_mut()) {
                            *d = src[ix0 + (ox - x0) * s];
                        }
                    }
                }
            }
        }
    }

    /// Adds the rows of `cols` back onto image `b` of `gx`.
    fn col2im(&self, cols: &[f64], b: usize, h: usize, w: usize, oh: usize, ow: usize, gx: &mut [f64]) {
        let (ci, k, s) = (self.in_channels, self.kernel, self.stride);
        for ic in 0..ci {
            let gin = &mut gx[(b * ci + ic) * h * w..(b * ci + ic + 1) * h * w];
            for ky in 0..k {
                let (y0, y1, iy0) = self.span(ky, h, oh);
                for kx in 0..k {
                    let (x0, x1, ix0) = self.span(kx, w, ow);
                    let row = &cols[((ic * k + ky) * k + kx) * oh * ow..][..oh * ow];
                    for (oy, iy) in (y0..y1).zip((iy0..).step_by(s)) {
                        let dst = &mut gin[iy * w..(iy + 1) * w];
                        for (ox, g) in (x0..x1).zip(&row[oy * ow + x0..oy * ow + x1]) {
                            dst[ix0 + (ox - x0) * s] += g;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, h, w, oh, ow) = self.check_input(x)?;
        let (co, taps, pix) = (self.out_channels, self.in_channels * self.kernel * self.kernel, oh * ow);
        let wd = self.weight.data();
        let mut cols = vec![0.0; taps * pix];
        let mut out = vec![0.0; n * co * pix];
        for b in 0..n {
            self.im2col(x.data(), b, h, w, oh, ow, &mut cols);
            for oc in 0..co {
                let plane = &mut out[(b * co + oc) * pix..(b * co + oc + 1) * pix];
                plane.fill(self.bias.data()[oc]);
                for (wv, row) in wd[oc * taps..(oc + 1) * taps].iter().zip(cols.chunks_exact(pix)) {
                    for (d, xv) in plane.iter_mut().zip(row) {
                        *d += wv * xv;
                    }
                }
            }
        }
        Tensor::new(vec![n, co, oh, ow], out)
    }

    pub fn backward(&self, x: &Tensor, gy: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let (n, h, w, oh, ow) = self.check_input(x)?;
        let (co, taps, pix) = (self.out_channels, self.in_channels * self.kernel * self.kernel, oh * ow);
        if gy.shape() != [n, co, oh, ow] {
            return Err(Error::ShapeMismatch(format!("conv upstream gradient {:?}", gy.shape())));
        }
        let (gyd, wd) = (gy.data(), self.weight.data());
        let mut gx = vec![0.0; x.len()];
        let mut gw = vec![0.0; self.weight.len()];
        let mut gb = vec![0.0; co];
        let mut cols = vec![0.0; taps * pix];
        let mut gcols = vec![0.0; taps * pix];
        for b in 0..n {
            self.im2col(x.data(), b, h, w, oh, ow, &mut cols);
            gcols.fill(0.0);
            for oc in 0..co {
                let g = &gyd[(b * co + oc) * pix..(b * co + oc + 1) * pix];
                gb[oc] += g.iter().sum::<f64>();
                let wrow = &wd[oc * taps..(oc + 1) * taps];
                let gwrow = &mut gw[oc * taps..(oc + 1) * taps];
                for (r, (xrow, grow)) in cols.chunks_exact(pix).zip(gcols.chunks_exact_mut(pix)).enumerate() {
                    gwrow[r] += g.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>();
                    let wv = wrow[r];
                    for (d, gv) in grow.iter_mut().zip(g) {
                        *d += wv * gv;
                    }
                }
            }
            self.col2im(&gcols, b, h, w, oh, ow, &mut gx);
        }
        Ok((
            Tensor::new(x.shape().to_vec(), gx)?,
            vec![Tensor::new(self.weight.shape().to_vec(), gw)?, Tensor::new(vec![co], gb)?],
        ))
    }
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut SeededRng) -> Self {
        Self {
            in_features,
            out_features,
            weight: glorot_uniform(rng, in_features, out_features, &[out_features, in_features]),
            bias: Tensor::zeros(&[out_features]),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let (n, f) = x.dims2()?;
        if f != self.in_features {
            return Err(Error::ShapeMismatch(format!("linear expects {} features, got {f}", self.in_features)));
        }
        Ok(n)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let (fi, fo) = (self.in_features, self.out_features);
        let (xd, wd, bd) = (x.data(), self.weight.data(), self.bias.data());
        let mut out = Vec::with_capacity(n * fo);
        for b in 0..n {
            let row = &xd[b * fi..(b + 1) * fi];
            for o in 0..fo {
                let wrow = &wd[o * fi..(o + 1) * fi];
                out.push(bd[o] + row.iter().zip(wrow).map(|(a, w)| a * w).sum::<f64>());
            }
        }
        Tensor::new(vec![n, fo], out)
    }

    pub fn backward(&self, x: &Tensor, gy: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let n = self.check_input(x)?;
        let (fi, fo) = (self.in_features, self.out_features);
        if gy.shape() != [n, fo] {
            return Err(Error::ShapeMismatch(format!("linear upstream gradient {:?}", gy.shape())));
        }
        let (xd, wd, gyd) = (x.data(), self.weight.data(), gy.data());
        let mut gx = vec![0.0; n * fi];
        let mut gw = vec![0.0; fo * fi];
        let mut gb = vec![0.0; fo];
        for b in 0..n {
            for o in 0..fo {
                let g = gyd[b * fo + o];
                gb[o] += g;
                for i in 0..fi {
                    gw[o * fi + i] += g * xd[b * fi + i];
                    gx[b * fi + i] += g * wd[o * fi + i];
                }
            }
        }
        Ok((
            Tensor::new(vec![n, fi], gx)?,
            vec![Tensor::new(vec![fo, fi], gw)?, Tensor::new(vec![fo], gb)?],
        ))
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative given the input `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl AvgPool2d {
    fn output(&self, x: &Tensor) -> Result<(usize, usize, usize, usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        let k = self.kernel;
        if k == 0 || h < k || w < k {
            return Err(Error::ShapeMismatch(format!("{h}x{w} input too small for {k}x{k} pooling")));
        }
        Ok((n, c, h, w, h / k, w / k))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w, oh, ow) = self.output(x)?;
        let k = self.kernel;
        let scale = 1.0 / (k * k) as f64;
        let xd = x.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        for p in 0..n * c {
            let plane = &xd[p * h * w..(p + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = 0.0;
                    for dy in 0..k {
                        for dx in 0..k {
                            s += plane[(oy * k + dy) * w + ox * k + dx];
                        }
                    }
                    out.push(s * scale);
                }
            }
        }
        Tensor::new(vec![n, c, oh, ow], out)
    }

    pub fn backward(&self, x: &Tensor, gy: &Tensor) -> Result<Tensor> {
        let (n, c, h, w, oh, ow) = self.output(x)?;
        if gy.shape() != [n, c, oh, ow] {
            return Err(Error::ShapeMismatch(format!("pool upstream gradient {:?}", gy.shape())));
        }
        let k = self.kernel;
        let scale = 1.0 / (k * k) as f64;
        let mut gx = vec![0.0; x.len()];
        for p in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gy.data()[(p * oh + oy) * ow + ox] * scale;
                    for dy in 0..k {
                        for dx in 0..k {
                            gx[p * h * w + (oy * k + dy) * w + ox * k + dx] += g;
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }
}

fn adaptive_bin(i: usize, input: usize, output: usize) -> (usize, usize) {
    let start = i * input / output;
    let end = ((i + 1) * input).div_ceil(output);
    (start, end)
}

impl AdaptiveAvgPool2d {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let (oh, ow) = (self.out_height, self.out_width);
        if oh == 0 || ow == 0 {
            return Err(Error::ShapeMismatch("adaptive pooling to an empty output".into()));
        }
        let xd = x.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        for p in 0..n * c {
            let plane = &xd[p * h * w..(p + 1) * h * w];
            for oy in 0..oh {
                let (y0, y1) = adaptive_bin(oy, h, oh);
                for ox in 0..ow {
                    let (x0, x1) = adaptive_bin(ox, w, ow);
                    let mut s = 0.0;
                    for y in y0..y1 {
                        for xx in x0..x1 {
                            s += plane[y * w + xx];
                        }
                    }
                    out.push(s / ((y1 - y0) * (x1 - x0)) as f64);
                }
            }
        }
        Tensor::new(vec![n, c, oh, ow], out)
    }

    pub fn backward(&self, x: &Tensor, gy: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let (oh, ow) = (self.out_height, self.out_width);
        if gy.shape() != [n, c, oh, ow] {
            return Err(Error::ShapeMismatch(format!("adaptive pool upstream gradient {:?}", gy.shape())));
        }
        let mut gx = vec![0.0; x.len()];
        for p in 0..n * c {
            for oy in 0..oh {
                let (y0, y1) = adaptive_bin(oy, h, oh);
                for ox in 0..ow {
                    let (x0, x1) = adaptive_bin(ox, w, ow);
                    let g = gy.data()[(p * oh + oy) * ow + ox] / ((y1 - y0) * (x1 - x0)) as f64;
                    for y in y0..y1 {
                        for xx in x0..x1 {
                            gx[p * h * w + y * w + xx] += g;
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Linear(_) => "linear",
            Layer::Activation(Activation::Relu) => "relu",
            Layer::Activation(Activation::Sigmoid) => "sigmoid",
            Layer::AvgPool(_) => "avg_pool",
            Layer::AdaptiveAvgPool(_) => "adaptive_avg_pool",
            Layer::Flatten => "flatten",
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = match self {
            Layer::Conv2d(l) => l.forward(x)?,
            Layer::Linear(l) => l.forward(x)?,
            Layer::Activation(a) => Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| a.apply(v)).collect())?,
            Layer::AvgPool(p) => p.forward(x)?,
            Layer::AdaptiveAvgPool(p) => p.forward(x)?,
            Layer::Flatten => {
                let n = *x.shape().first().unwrap_or(&0);
                let rest = x.len().checked_div(n).unwrap_or(0);
                x.clone().reshape(vec![n, rest])?
            }
        };
        y.ensure_finite(self.name())
    }

    /// Gradient with respect to the input and to each parameter tensor,
    /// given the forward input `x`, output `y` and upstream gradient `gy`.
    pub fn backward(&self, x: &Tensor, y: &Tensor, gy: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        gy.same_shape(y)?;
        let (gx, grads) = match self {
            Layer::Conv2d(l) => l.backward(x, gy)?,
            Layer::Linear(l) => l.backward(x, gy)?,
            Layer::Activation(a) => {
                x.same_shape(y)?;
                let g = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(gy.data())
                    .map(|((&xv, &yv), &g)| g * a.derivative(xv, yv))
                    .collect();
                (Tensor::new(x.shape().to_vec(), g)?, Vec::new())
            }
            Layer::AvgPool(p) => (p.backward(x, gy)?, Vec::new()),
            Layer::AdaptiveAvgPool(p) => (p.backward(x, gy)?, Vec::new()),
            Layer::Flatten => (gy.clone().reshape(x.shape().to_vec())?, Vec::new()),
        };
        Ok((gx.ensure_finite(self.name())?, grads))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::Linear(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Linear(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }
}

/// Forward activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `values[i]` is the input of layer `i`; the last entry is the output.
    pub values: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.values.last().expect("trace holds at least the input")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for l in &self.layers {
            cur = l.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<Trace> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.clone());
        for l in &self.layers {
            let y = l.forward(values.last().expect("non-empty"))?;
            values.push(y);
        }
        Ok(Trace { values })
    }

    /// Returns the input gradient and the parameter gradients in
    /// [`Sequential::params`] order.
    pub fn backward(&self, trace: &Trace, gy: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if trace.values.len() != self.layers.len() + 1 {
            return Err(Error::ShapeMismatch("trace does not match the network".into()));
        }
        let mut g = gy.clone();
        let mut per_layer: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate().rev() {
            let (gx, grads) = l.backward(&trace.values[i], &trace.values[i + 1], &g)?;
            per_layer.push(grads);
            g = gx;
        }
        per_layer.reverse();
        Ok((g, per_layer.into_iter().flatten().collect()))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// On/off state of every ReLU unit in a trace; a change between two
    /// evaluations means a finite difference straddled a kink.
    pub fn relu_pattern(&self, trace: &Trace) -> Vec<bool> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Layer::Activation(Activation::Relu)))
            .flat_map(|(i, _)| trace.values[i].data().iter().map(|&v| v > 0.0))
            .collect()
    }
}
