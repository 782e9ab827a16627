//! Producers of `(distribution grid, signal count)` pairs that drive
//! synthesis: replayed ground truth, a lidar-based heuristic, or files
//! written by an external model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::FrameBundle;
use crate::distribution::{estimate_sigma, project_datagram, rasterize_mixture, Covariance2, ProbabilityGrid};
use crate::error::{Error, Result};
use crate::geometry::{project_to_image, CameraIntrinsics, PixelCoord};
use crate::image::{read_pnm, Pnm};
use crate::sampler::grid_from_grayscale;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Heuristic,
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionPrediction {
    pub grid: ProbabilityGrid,
    pub count: usize,
    pub provenance: Provenance,
}

impl DistributionPrediction {
    pub fn new(grid: ProbabilityGrid, count: usize, provenance: Provenance) -> Result<Self> {
        if (grid.total() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!("grid mass {} is not 1", grid.total())));
        }
        if count == 0 {
            return Err(Error::NonPositiveCount(0));
        }
        Ok(Self { grid, count, provenance })
    }
}

/// The camera seen at a reduced grid resolution: pixel coordinates and
/// covariances scale by `scale` and `scale²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridView {
    pub intrinsics: CameraIntrinsics,
    pub width: usize,
    pub height: usize,
    pub scale: f64,
}

impl GridView {
    pub fn new(frame: &FrameBundle, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::OutOfRange(format!("grid scale {scale} must be positive")));
        }
        let width = (frame.width() as f64 * scale).round() as usize;
        let height = (frame.height() as f64 * scale).round() as usize;
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!("scale {scale} leaves an empty grid")));
        }
        Ok(Self {
            intrinsics: frame.calibration.intrinsics.scaled(scale)?,
            width,
            height,
            scale,
        })
    }

    pub fn full(frame: &FrameBundle) -> Self {
        Self {
            intrinsics: frame.calibration.intrinsics,
            width: frame.width(),
            height: frame.height(),
            scale: 1.0,
        }
    }

    /// Covariance given in full-resolution pixels, expressed in grid cells.
    pub fn sigma(&self, sigma_image: &Covariance2) -> Result<Covariance2> {
        sigma_image.scaled(self.scale * self.scale)
    }
}

/// Pixels of the frame's ground-truth signals on `view`.
pub fn ground_truth_pixels(frame: &FrameBundle, view: &GridView) -> Result<Vec<PixelCoord>> {
    let gt = frame.ground_truth.as_ref().filter(|d| !d.is_empty()).ok_or_else(|| Error::NoGroundTruth(frame.id.clone()))?;
    let projected = project_datagram(gt, &view.intrinsics, &frame.calibration.radar_to_camera, view.width, view.height);
    Ok(projected.pixels)
}

/// Replays the ground truth as a Gaussian mixture; the count is the number
/// of signals that land in the image. `sigma` is in full-resolution pixels.
pub fn oracle_predict(frame: &FrameBundle, sigma: &Covariance2, view: &GridView) -> Result<DistributionPrediction> {
    let pixels = ground_truth_pixels(frame, view)?;
    if pixels.is_empty() {
        return Err(Error::NoGroundTruth(format!("{} (no signal projects into the image)", frame.id)));
    }
    let grid = rasterize_mixture(&pixels, &view.sigma(sigma)?, view.width, view.height)?;
    DistributionPrediction::new(grid, pixels.len(), Provenance::Oracle)
}

/// Ground-truth projections grouped by annotated object region (first
/// match wins). Signals outside every region are left out.
pub fn sigma_groups(frame: &FrameBundle) -> Result<Vec<Vec<PixelCoord>>> {
    let pixels = ground_truth_pixels(frame, &GridView::full(frame))?;
    let regions = frame.objects.regions();
    let mut groups = vec![Vec::new(); regions.len()];
    for px in pixels {
        if let Some(slot) = regions.iter().position(|r| r.contains(&px)) {
            groups[slot].push(px);
        }
    }
    groups.retain(|g| !g.is_empty());
    Ok(groups)
}

/// Pooled covariance of the object groups of every frame, in
/// full-resolution pixels. When no frame has annotated objects, each
/// frame's whole projection is one group.
pub fn estimate_sigma_for_frames(frames: &[FrameBundle]) -> Result<Covariance2> {
    let mut groups = Vec::new();
    for f in frames {
        groups.extend(sigma_groups(f)?);
    }
    if groups.iter().map(Vec::len).sum::<usize>() < 2 {
        groups = frames
            .iter()
            .map(|f| ground_truth_pixels(f, &GridView::full(f)))
            .collect::<Result<_>>()?;
    }
    estimate_sigma(&groups)
}

/// Linear count-versus-speed model and a shared mixture covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicModel {
    pub slope: f64,
    pub intercept: f64,
    /// Full-resolution pixels.
    pub sigma: Covariance2,
}

impl HeuristicModel {
    pub fn count_for_speed(&self, speed: f64) -> usize {
        (self.slope * speed + self.intercept).round().max(1.0) as usize
    }
}

/// Least-squares `(slope, intercept)` of `y ≈ a x + b`; the slope is 0 when
/// the `x` values do not vary.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} sample(s); need at least 2", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let scale = xs.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-12 * scale {
        return Ok((0.0, my));
    }
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

pub fn fit_heuristic(frames: &[FrameBundle]) -> Result<HeuristicModel> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!("{} training frame(s); need at least 2", frames.len())));
    }
    let mut speeds = Vec::with_capacity(frames.len());
    let mut counts = Vec::with_capacity(frames.len());
    for f in frames {
        speeds.push(f.ego.speed());
        counts.push(ground_truth_pixels(f, &GridView::full(f))?.len() as f64);
    }
    let (slope, intercept) = fit_line(&speeds, &counts)?;
    Ok(HeuristicModel {
        slope,
        intercept,
        sigma: estimate_sigma_for_frames(frames)?,
    })
}

/// Uniform mixture over the lidar points that project into the image.
pub fn heuristic_predict(frame: &FrameBundle, model: &HeuristicModel, view: &GridView) -> Result<DistributionPrediction> {
    let to_cam = &frame.calibration.radar_to_camera;
    let pixels: Vec<PixelCoord> = frame
        .lidar_in_radar()
        .iter()
        .filter_map(|p| project_to_image(&view.intrinsics, to_cam, p).ok())
        .filter(|px| px.in_image(view.width, view.height))
        .collect();
    if pixels.is_empty() {
        return Err(Error::EmptyLidar);
    }
    let grid = rasterize_mixture(&pixels, &view.sigma(&model.sigma)?, view.width, view.height)?;
    DistributionPrediction::new(grid, model.count_for_speed(frame.ego.speed()), Provenance::Heuristic)
}

/// Parses a count file: one positive ASCII integer.
pub fn parse_count(text: &str, origin: &Path) -> Result<usize> {
    let t = text.trim();
    let n: i64 = t.parse().map_err(|_| Error::parse(origin, 1, format!("{t:?} is not an integer count")))?;
    if n < 1 {
        return Err(Error::NonPositiveCount(n));
    }
    Ok(n as usize)
}

/// Reads `<grid>.pgm` and `<count>` written by an external model. The grid
/// may use any positive scaling; it is renormalized.
pub fn load_external(grid_path: &Path, count_path: &Path) -> Result<DistributionPrediction> {
    let gray = match read_pnm(grid_path)? {
        Pnm::Gray(g) => g,
        Pnm::Rgb(_) => return Err(Error::UnsupportedFormat(format!("{}: expected a P5 grayscale grid", grid_path.display()))),
    };
    let grid = grid_from_grayscale(gray.width, gray.height, gray.data.iter().copied())?;
    let text = std::fs::read_to_string(count_path).map_err(|e| Error::io(count_path, e))?;
    DistributionPrediction::new(grid, parse_count(&text, count_path)?, Provenance::External)
}

/// Loads frame `id` from a prediction directory: `<id>.grid` (binary, full
/// precision) or else `<id>.pgm`, plus `<id>.count`.
pub fn load_external_dir(dir: &Path, id: &str) -> Result<DistributionPrediction> {
    let count_path = dir.join(format!("{id}.count"));
    if !count_path.is_file() {
        return Err(Error::parse(&count_path, 0, "count file is missing"));
    }
    let text = std::fs::read_to_string(&count_path).map_err(|e| Error::io(&count_path, e))?;
    let count = parse_count(&text, &count_path)?;
    let binary = dir.join(format!("{id}.grid"));
    if binary.is_file() {
        return DistributionPrediction::new(ProbabilityGrid::read_binary(&binary)?, count, Provenance::External);
    }
    load_external(&dir.join(format!("{id}.pgm")), &count_path)
}
