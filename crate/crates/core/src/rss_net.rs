//! Signal-strength regression network.
//!
//! Two convolutional branches (image patch, range image with validity mask)
//! are pooled to 8x8, concatenated to 32 channels, squeezed by a 1x1
//! convolution and embedded by a fully connected layer. The signal's
//! position and Doppler velocity get their own small embedding, and an MLP
//! on the joined features predicts the strength in `[a_min, a_max]`
//! normalized units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FrameBundle, RadarDatagram, RadarSignal};
use crate::encoders::{build_range_image, extract_patch, local_cloud, ImagePatch, RangeImage};
use crate::error::{Error, Result};
use crate::geometry::{project_to_image, spherical_to_cartesian, Vec3};
use crate::nn::{
    concat, decode_model, encode_model, split, Activation, Adam, AdamConfig, AdaptiveAvgPool2d, AvgPool2d, Conv2d, GradCheckable, Layer,
    Linear, Sequential, Tensor, Trace,
};
use crate::sampler::SeededRng;

const BRANCH_CHANNELS: usize = 16;
const FUSED_FEATURES: usize = 32;
const POINT_FEATURES: usize = 8;
const HIDDEN: usize = 16;

/// RNG stream used for weight initialization.
const INIT_STREAM: u64 = 0x5253_534e;
/// RNG stream used for minibatch shuffling.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RssNetConfig {
    /// Patch half-size `r_c`; the patch is `2 r_c` pixels square.
    pub patch_radius: usize,
    pub range_width: usize,
    pub range_height: usize,
    /// Radius `r_l` of the local lidar neighborhood, meters.
    pub local_radius: f64,
    /// Side of the pooled feature maps of both branches.
    pub pooled: usize,
    /// Divides x, y, z before they enter the network.
    pub position_scale: f64,
    /// Divides the Doppler velocity before it enters the network.
    pub velocity_scale: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for RssNetConfig {
    fn default() -> Self {
        Self {
            patch_radius: 50,
            range_width: 128,
            range_height: 32,
            local_radius: 1.0,
            pooled: 8,
            position_scale: 50.0,
            velocity_scale: 20.0,
            a_min: 0.0,
            a_max: 1.0,
        }
    }
}

impl RssNetConfig {
    pub fn patch_side(&self) -> usize {
        2 * self.patch_radius
    }

    fn check_range(&self) -> Result<()> {
        if self.a_max > self.a_min && self.a_min.is_finite() && self.a_max.is_finite() {
            Ok(())
        } else {
            Err(Error::DegenerateRange {
                a_min: self.a_min,
                a_max: self.a_max,
            })
        }
    }

    pub fn normalize(&self, a: f64) -> f64 {
        (a - self.a_min) / (self.a_max - self.a_min)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        self.a_min + y * (self.a_max - self.a_min)
    }
}

/// Network inputs for one signal.
#[derive(Clone, Debug, PartialEq)]
pub struct RssFeatures {
    pub patch: ImagePatch,
    pub range: RangeImage,
    /// `(x, y, z, v)` in the radar frame, meters and m/s.
    pub point: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RssSample {
    pub features: RssFeatures,
    /// Signal strength in dataset units.
    pub target: f64,
}

/// Builds the features of `signal` from the frame's image and its lidar
/// cloud in the radar frame.
pub fn signal_features(frame: &FrameBundle, cloud_radar: &[Vec3], signal: &RadarSignal, config: &RssNetConfig) -> Result<RssFeatures> {
    let p = spherical_to_cartesian(&signal.spherical());
    let px = project_to_image(&frame.calibration.intrinsics, &frame.calibration.radar_to_camera, &p)?;
    if !px.in_image(frame.width(), frame.height()) {
        return Err(Error::AnchorOutOfImage {
            u: px.u,
            v: px.v,
            width: frame.width(),
            height: frame.height(),
        });
    }
    let (u, v) = px.to_index();
    let patch = extract_patch(&frame.image, u, v, config.patch_radius)?;
    let local = local_cloud(cloud_radar, &p, config.local_radius);
    let range = build_range_image(&local, &p, config.local_radius, config.range_width, config.range_height);
    Ok(RssFeatures {
        patch,
        range,
        point: [p.x, p.y, p.z, signal.v],
    })
}

/// Inputs of a minibatch in tensor form.
pub struct RssBatch {
    pub patch: Tensor,
    pub range: Tensor,
    pub point: Tensor,
}

impl RssBatch {
    pub fn new<'a, I>(features: I, config: &RssNetConfig) -> Result<Self>
    where
        I: IntoIterator<Item = &'a RssFeatures>,
    {
        let s = config.patch_side();
        let (rw, rh) = (config.range_width, config.range_height);
        let (mut patch, mut range, mut point) = (Vec::new(), Vec::new(), Vec::new());
        let mut n = 0;
        for f in features {
            if f.patch.side() != s || f.range.width != rw || f.range.height != rh {
                return Err(Error::ShapeMismatch(format!(
                    "features are {}px / {}x{}, network expects {s}px / {rw}x{rh}",
                    f.patch.side(),
                    f.range.width,
                    f.range.height
                )));
            }
            // interleaved RGB to planar channels
            for c in 0..3 {
                patch.extend(f.patch.data().iter().skip(c).step_by(3).map(|&b| b as f64 / 255.0));
            }
            range.extend(f.range.pixels.iter().map(|&b| b as f64 / 255.0));
            range.extend(f.range.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
            let [x, y, z, v] = f.point;
            let ps = config.position_scale;
            point.extend([x / ps, y / ps, z / ps, v / config.velocity_scale]);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            patch: Tensor::new(vec![n, 3, s, s], patch)?,
            range: Tensor::new(vec![n, 2, rh, rw], range)?,
            point: Tensor::new(vec![n, 4], point)?,
        })
    }

    pub fn len(&self) -> usize {
        self.point.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RssNet {
    pub config: RssNetConfig,
    pub patch: Sequential,
    pub range: Sequential,
    pub fuse: Sequential,
    pub point: Sequential,
    pub head: Sequential,
}

/// Forward activations of every branch.
pub struct RssTrace {
    patch: Trace,
    range: Trace,
    fuse: Trace,
    point: Trace,
    head: Trace,
}

impl RssTrace {
    pub fn output(&self) -> &Tensor {
        self.head.output()
    }
}

#[derive(Serialize, Deserialize)]
struct StoredConfig {
    config: RssNetConfig,
    branch_layers: [usize; 5],
}

impl RssNet {
    pub fn new(config: RssNetConfig, seed: u64) -> Result<Self> {
        config.check_range()?;
        let mut rng = SeededRng::new(seed, INIT_STREAM);
        let q = config.pooled;
        let adaptive = Layer::AdaptiveAvgPool(AdaptiveAvgPool2d { out_height: q, out_width: q });
        let relu = || Layer::Activation(Activation::Relu);
        let patch = Sequential::new(vec![
            Layer::Conv2d(Conv2d::new(3, 8, 3, 2, 1, &mut rng)),
            relu(),
            Layer::AvgPool(AvgPool2d { kernel: 2 }),
            Layer::Conv2d(Conv2d::new(8, BRANCH_CHANNELS, 3, 2, 1, &mut rng)),
            relu(),
            adaptive.clone(),
        ]);
        let range = Sequential::new(vec![
            Layer::Conv2d(Conv2d::new(2, 8, 3, 2, 1, &mut rng)),
            relu(),
            Layer::Conv2d(Conv2d::new(8, BRANCH_CHANNELS, 3, 2, 1, &mut rng)),
            relu(),
            adaptive,
        ]);
        let fuse = Sequential::new(vec![
            Layer::Conv2d(Conv2d::new(2 * BRANCH_CHANNELS, 1, 1, 1, 0, &mut rng)),
            Layer::Flatten,
            Layer::Linear(Linear::new(q * q, FUSED_FEATURES, &mut rng)),
            relu(),
        ]);
        let point = Sequential::new(vec![Layer::Linear(Linear::new(4, POINT_FEATURES, &mut rng)), relu()]);
        let head = Sequential::new(vec![
            Layer::Linear(Linear::new(FUSED_FEATURES + POINT_FEATURES, HIDDEN, &mut rng)),
            relu(),
            Layer::Linear(Linear::new(HIDDEN, 1, &mut rng)),
        ]);
        let net = Self {
            config,
            patch,
            range,
            fuse,
            point,
            head,
        };
        // fail early on input sizes the branches cannot handle
        let probe = RssBatch {
            patch: Tensor::zeros(&[1, 3, config.patch_side(), config.patch_side()]),
            range: Tensor::zeros(&[1, 2, config.range_height, config.range_width]),
            point: Tensor::zeros(&[1, 4]),
        };
        net.forward(&probe)?;
        Ok(net)
    }

    fn branches(&self) -> [&Sequential; 5] {
        [&self.patch, &self.range, &self.fuse, &self.point, &self.head]
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.branches().into_iter().flat_map(|b| b.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.patch.params_mut();
        out.extend(self.range.params_mut());
        out.extend(self.fuse.params_mut());
        out.extend(self.point.params_mut());
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn forward_trace(&self, batch: &RssBatch) -> Result<RssTrace> {
        let patch = self.patch.forward_trace(&batch.patch)?;
        let range = self.range.forward_trace(&batch.range)?;
        let fuse = self.fuse.forward_trace(&concat(&[patch.output(), range.output()])?)?;
        let point = self.point.forward_trace(&batch.point)?;
        let head = self.head.forward_trace(&concat(&[fuse.output(), point.output()])?)?;
        Ok(RssTrace {
            patch,
            range,
            fuse,
            point,
            head,
        })
    }

    /// Normalized predictions, shape `[N, 1]`.
    pub fn forward(&self, batch: &RssBatch) -> Result<Tensor> {
        Ok(self.forward_trace(batch)?.head.values.pop().expect("non-empty trace"))
    }

    /// Parameter gradients, in [`RssNet::params`] order, for upstream
    /// gradient `gy` on the output.
    pub fn backward(&self, trace: &RssTrace, gy: &Tensor) -> Result<Vec<Tensor>> {
        let (g_joined, g_head) = self.head.backward(&trace.head, gy)?;
        let mut parts = split(&g_joined, &[FUSED_FEATURES, POINT_FEATURES])?.into_iter();
        let (g_fused, g_point_out) = (parts.next().expect("two parts"), parts.next().expect("two parts"));
        let (_, g_point) = self.point.backward(&trace.point, &g_point_out)?;
        let (g_maps, g_fuse) = self.fuse.backward(&trace.fuse, &g_fused)?;
        let mut maps = split(&g_maps, &[BRANCH_CHANNELS, BRANCH_CHANNELS])?.into_iter();
        let (_, g_patch) = self.patch.backward(&trace.patch, &maps.next().expect("two parts"))?;
        let (_, g_range) = self.range.backward(&trace.range, &maps.next().expect("two parts"))?;
        Ok([g_patch, g_range, g_fuse, g_point, g_head].into_iter().flatten().collect())
    }

    /// On/off state of every ReLU unit in a trace.
    pub fn relu_pattern(&self, trace: &RssTrace) -> Vec<bool> {
        let mut p = self.patch.relu_pattern(&trace.patch);
        p.extend(self.range.relu_pattern(&trace.range));
        p.extend(self.fuse.relu_pattern(&trace.fuse));
        p.extend(self.point.relu_pattern(&trace.point));
        p.extend(self.head.relu_pattern(&trace.head));
        p
    }

    /// Mean squared error in normalized units and its gradient.
    pub fn loss_and_gradient(&self, batch: &RssBatch, targets_norm: &[f64]) -> Result<(f64, Vec<Tensor>)> {
        let trace = self.forward_trace(batch)?;
        let (loss, gy) = normalized_mse(trace.output(), targets_norm)?;
        Ok((loss, self.backward(&trace, &gy)?))
    }

    /// Strength predictions in dataset units.
    pub fn predict(&self, features: &[RssFeatures]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(features.len());
        for chunk in features.chunks(64) {
            let y = self.forward(&RssBatch::new(chunk, &self.config)?)?;
            out.extend(y.data().iter().map(|&v| self.config.denormalize(v)));
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let branches = self.branches();
        let stored = StoredConfig {
            config: self.config,
            branch_layers: branches.map(|b| b.layers.len()),
        };
        let json = serde_json::to_string(&stored).expect("config serializes");
        encode_model(branches.iter().flat_map(|b| b.layers.iter()), &json)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (layers, json) = decode_model(bytes)?;
        let stored: StoredConfig = serde_json::from_str(&json)?;
        if stored.branch_layers.iter().sum::<usize>() != layers.len() {
            return Err(Error::ShapeMismatch("branch layout does not match the stored layers".into()));
        }
        let mut it = layers.into_iter();
        let mut take = |n: usize| Sequential::new(it.by_ref().take(n).collect());
        let [a, b, c, d, e] = stored.branch_layers;
        let net = Self {
            config: stored.config,
            patch: take(a),
            range: take(b),
            fuse: take(c),
            point: take(d),
            head: take(e),
        };
        net.config.check_range()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

fn normalized_mse(output: &Tensor, targets: &[f64]) -> Result<(f64, Tensor)> {
    if output.len() != targets.len() {
        return Err(Error::LengthMismatch(output.len(), targets.len()));
    }
    let m = targets.len() as f64;
    let diff: Vec<f64> = output.data().iter().zip(targets).map(|(y, t)| y - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / m;
    let grad = diff.iter().map(|d| 2.0 * d / m).collect();
    Ok((loss, Tensor::new(output.shape().to_vec(), grad)?))
}

/// Mean squared strength error, normalized by the dataset range.
pub fn rss_loss(predictions: &[f64], targets: &[f64], a_min: f64, a_max: f64) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch(predictions.len(), targets.len()));
    }
    if !(a_max > a_min) {
        return Err(Error::DegenerateRange { a_min, a_max });
    }
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let span = a_max - a_min;
    Ok(predictions.iter().zip(targets).map(|(p, a)| ((a - p) / span).powi(2)).sum::<f64>() / targets.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Minibatch size; 0 means the whole dataset.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-4,
            seed: 0,
            batch_size: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Minibatch loss at the parameters used for each optimizer step.
    pub step_losses: Vec<f64>,
    /// `(steps completed, full-dataset loss)`, starting with the initial
    /// model and then after every epoch.
    pub epoch_losses: Vec<(usize, f64)>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (step, loss) in &self.epoch_losses {
            out.push_str(&format!("{step},{loss}\n"));
        }
        out
    }

    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().map(|e| e.1).unwrap_or(f64::NAN)
    }
}

/// Target range of a training set.
pub fn target_range(samples: &[RssSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let lo = samples.iter().map(|s| s.target).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.target).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::DegenerateRange { a_min: lo, a_max: hi });
    }
    Ok((lo, hi))
}

/// Trains a fresh network; `a_min`/`a_max` are taken from `samples` and
/// override the ones in `config`. Deterministic for a given seed.
pub fn train(samples: &[RssSample], config: RssNetConfig, train: &TrainConfig) -> Result<(RssNet, TrainHistory)> {
    let (a_min, a_max) = target_range(samples)?;
    let config = RssNetConfig { a_min, a_max, ..config };
    let mut net = RssNet::new(config, train.seed)?;
    let mut opt = Adam::new(AdamConfig { lr: train.lr, ..Default::default() }, net.params());
    let mut rng = SeededRng::new(train.seed, SHUFFLE_STREAM);
    let batch_size = if train.batch_size == 0 { samples.len() } else { train.batch_size.min(samples.len()) };
    let full_batch = batch_size == samples.len();
    let targets: Vec<f64> = samples.iter().map(|s| config.normalize(s.target)).collect();
    let all = RssBatch::new(samples.iter().map(|s| &s.features), &config)?;

    let full_loss = |net: &RssNet| -> Result<f64> { normalized_mse(&net.forward(&all)?, &targets).map(|(l, _)| l) };
    let mut history = TrainHistory::default();
    history.epoch_losses.push((0, full_loss(&net)?));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..train.epochs {
        if !full_batch {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch_size) {
            let (loss, grads) = if full_batch {
                net.loss_and_gradient(&all, &targets)?
            } else {
                let batch = RssBatch::new(chunk.iter().map(|&i| &samples[i].features), &config)?;
                let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                net.loss_and_gradient(&batch, &t)?
            };
            history.step_losses.push(loss);
            opt.step(&mut net.params_mut(), &grads)?;
        }
        history.epoch_losses.push((opt.steps() as usize, full_loss(&net)?));
    }
    Ok((net, history))
}

/// Draws up to `per_frame` signals with known strength from each frame's
/// ground truth and builds their features. Signals that do not project into
/// the image are skipped.
pub fn build_training_set(frames: &[FrameBundle], per_frame: usize, config: &RssNetConfig, rng: &mut SeededRng) -> Result<Vec<RssSample>> {
    let mut samples = Vec::new();
    for frame in frames {
        let Some(gt) = &frame.ground_truth else { continue };
        let cloud = frame.lidar_in_radar();
        let mut usable: Vec<(RssFeatures, f64)> = Vec::new();
        for s in &gt.signals {
            let Some(a) = s.rss else { continue };
            match signal_features(frame, &cloud, s, config) {
                Ok(f) => usable.push((f, a)),
                Err(Error::AnchorOutOfImage { .. } | Error::BehindCamera { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        rng.shuffle(&mut usable);
        samples.extend(usable.into_iter().take(per_frame).map(|(features, target)| RssSample { features, target }));
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(samples)
}

/// Fills in the strength of every signal of a synthesized datagram that
/// projects into the image; the others keep no strength.
pub fn predict_datagram_rss(datagram: &RadarDatagram, frame: &FrameBundle, model: &RssNet) -> Result<RadarDatagram> {
    let cloud = frame.lidar_in_radar();
    let mut features = Vec::with_capacity(datagram.len());
    let mut slots = Vec::with_capacity(datagram.len());
    for (i, s) in datagram.signals.iter().enumerate() {
        match signal_features(frame, &cloud, s, &model.config) {
            Ok(f) => {
                features.push(f);
                slots.push(i);
            }
            Err(Error::AnchorOutOfImage { .. } | Error::BehindCamera { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let mut signals: Vec<RadarSignal> = datagram.signals.iter().map(|s| RadarSignal { rss: None, ..*s }).collect();
    if !features.is_empty() {
        for (i, a) in slots.into_iter().zip(model.predict(&features)?) {
            signals[i].rss = Some(a);
        }
    }
    Ok(RadarDatagram::new(datagram.frame_id.clone(), signals))
}

/// Whole-network loss as a function of every parameter, for gradient
/// checking.
pub struct RssNetProbe<'a> {
    pub net: RssNet,
    pub batch: &'a RssBatch,
    pub targets: Vec<f64>,
    lens: Vec<usize>,
}

impl<'a> RssNetProbe<'a> {
    pub fn new(net: RssNet, batch: &'a RssBatch, targets: Vec<f64>) -> Self {
        let lens = net.params().iter().map(|t| t.len()).collect();
        Self { net, batch, targets, lens }
    }
}

impl GradCheckable for RssNetProbe<'_> {
    fn param_count(&self) -> usize {
        self.lens.iter().sum()
    }

    fn get(&self, index: usize) -> f64 {
        let (t, j) = crate::nn::gradcheck::locate(self.lens.iter().copied(), index);
        self.net.params()[t].data()[j]
    }

    fn set(&mut self, index: usize, value: f64) {
        let (t, j) = crate::nn::gradcheck::locate(self.lens.iter().copied(), index);
        self.net.params_mut()[t].data_mut()[j] = value;
    }

    fn evaluate(&self) -> Result<(f64, Vec<bool>)> {
        let trace = self.net.forward_trace(self.batch)?;
        let (loss, _) = normalized_mse(trace.output(), &self.targets)?;
        Ok((loss, self.net.relu_pattern(&trace)))
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let (_, grads) = self.net.loss_and_gradient(self.batch, &self.targets)?;
        Ok(grads.iter().flat_map(|g| g.data().iter().copied()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{grad_check, DEFAULT_STEP};

    pub(crate) fn small_config() -> RssNetConfig {
        RssNetConfig {
            patch_radius: 8,
            range_width: 32,
            range_height: 8,
            a_min: -10.0,
            a_max: 30.0,
            ..Default::default()
        }
    }

    fn random_features(rng: &mut SeededRng, config: &RssNetConfig, n: usize) -> Vec<RssFeatures> {
        (0..n)
            .map(|_| {
                let mut img = crate::image::RgbImage::new(40, 40);
                for b in img.data.iter_mut() {
                    *b = rng.below(256) as u8;
                }
                let patch = extract_patch(&img, 20, 20, config.patch_radius).unwrap();
                let anchor = Vec3::new(rng.uniform(5.0, 20.0), rng.uniform(-3.0, 3.0), rng.uniform(-1.0, 1.0));
                let cloud: Vec<Vec3> = (0..30)
                    .map(|_| anchor + Vec3::new(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)))
                    .collect();
                let range = build_range_image(&cloud, &anchor, 1.0, config.range_width, config.range_height);
                RssFeatures {
                    patch,
                    range,
                    point: [anchor.x, anchor.y, anchor.z, rng.uniform(-5.0, 5.0)],
                }
            })
            .collect()
    }

    #[test]
    fn loss_by_hand() {
        assert!((rss_loss(&[20.0], &[10.0], 0.0, 100.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(rss_loss(&[1.0, 2.0], &[1.0, 2.0], 0.0, 1.0).unwrap(), 0.0);
        let a = rss_loss(&[3.0, 7.0], &[1.0, 2.0], 0.0, 10.0).unwrap();
        let b = rss_loss(&[3.0, 7.0], &[1.0, 2.0], 0.0, 20.0).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!(matches!(rss_loss(&[1.0], &[1.0, 2.0], 0.0, 1.0), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(rss_loss(&[1.0], &[1.0], 1.0, 1.0), Err(Error::DegenerateRange { .. })));
    }

    #[test]
    fn parameter_budget() {
        let net = RssNet::new(RssNetConfig::default(), 0).unwrap();
        assert!(net.param_count() < 10_000, "{}", net.param_count());
        let small = RssNet::new(small_config(), 0).unwrap();
        assert_eq!(net.param_count(), small.param_count());
    }

    #[test]
    fn zero_final_layer_gives_bias() {
        let mut net = RssNet::new(small_config(), 1).unwrap();
        if let Some(Layer::Linear(l)) = net.head.layers.last_mut() {
            l.weight.data_mut().fill(0.0);
            l.bias.data_mut()[0] = 0.25;
        }
        let mut rng = SeededRng::new(2, 0);
        let f = random_features(&mut rng, &net.config, 3);
        let p = net.predict(&f).unwrap();
        assert!(p.iter().all(|&a| a == net.config.denormalize(0.25)));
    }

    #[test]
    fn velocity_is_wired_in() {
        let net = RssNet::new(small_config(), 4).unwrap();
        let mut rng = SeededRng::new(5, 0);
        let f = random_features(&mut rng, &net.config, 1).remove(0);
        let mut g = f.clone();
        let mut changed = false;
        for dv in [-15.0, -5.0, 5.0, 15.0] {
            g.point[3] = f.point[3] + dv;
            let p = net.predict(&[f.clone(), g.clone()]).unwrap();
            changed |= p[0] != p[1];
        }
        assert!(changed);
        let twice = net.predict(&[f.clone(), f]).unwrap();
        assert_eq!(twice[0], twice[1]);
    }

    #[test]
    fn full_network_gradient() {
        let net = RssNet::new(small_config(), 11).unwrap();
        let mut rng = SeededRng::new(12, 0);
        let f = random_features(&mut rng, &net.config, 2);
        let batch = RssBatch::new(&f, &net.config).unwrap();
        let mut probe = RssNetProbe::new(net, &batch, vec![0.3, 0.8]);
        let r = grad_check(&mut probe, DEFAULT_STEP).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert!(r.skipped_kinks * 100 < r.checked, "{r:?}");
    }

    #[test]
    fn model_bytes_round_trip() {
        let net = RssNet::new(small_config(), 3).unwrap();
        let bytes = net.to_bytes();
        let back = RssNet::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let mut rng = SeededRng::new(6, 0);
        let config = small_config();
        let samples: Vec<RssSample> = random_features(&mut rng, &config, 6)
            .into_iter()
            .enumerate()
            .map(|(i, features)| RssSample { features, target: i as f64 })
            .collect();
        let (_, h) = train(&samples, config, &TrainConfig { epochs: 3, lr: 0.0, seed: 1, batch_size: 0 }).unwrap();
        assert_eq!(h.epoch_losses.len(), 4);
        assert!(h.epoch_losses.iter().all(|e| e.1 == h.epoch_losses[0].1));
        assert!(matches!(train(&[], config, &TrainConfig::default()), Err(Error::EmptyDataset)));
    }
}
