//! Radar-signal probability distributions over the image plane.
//!
//! Ground truth is a Gaussian mixture centered on the projected radar
//! signals, evaluated at pixel centers and normalized to unit mass. The same
//! grid type carries predictor output, so KL divergence and the count loss
//! used to score distribution predictors live here too.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::RadarDatagram;
use crate::error::{Error, Result};
use crate::geometry::{project_to_image, spherical_to_cartesian, CameraIntrinsics, PixelCoord, RigidTransform};

/// Floor applied to both grids before taking logarithms in [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-12;

/// Smallest eigenvalue allowed in an estimated covariance, in px².
pub const SIGMA_EIGEN_FLOOR: f64 = 0.25;

/// Squared Mahalanobis radius beyond which `exp(-d²/2)` underflows to zero
/// in f64, so truncating there does not change any cell.
const UNDERFLOW_RADIUS_SQ: f64 = 2.0 * 745.2;

const GRID_MAGIC: &[u8; 4] = b"RFGD";

/// Probability mass over the pixels of a `width x height` image, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    width: usize,
    height: usize,
    mass: Vec<f64>,
}

impl ProbabilityGrid {
    /// Normalizes nonnegative weights into a grid.
    pub fn from_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!("empty {width}x{height} grid")));
        }
        if weights.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} cells for a {width}x{height} grid",
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidGrid(format!("cell weight {bad}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroGrid);
        }
        if !total.is_finite() {
            return Err(Error::InvalidGrid("total weight overflows".into()));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { width, height, mass })
    }

    /// A grid with all mass on one pixel.
    pub fn delta(width: usize, height: usize, u: usize, v: usize) -> Result<Self> {
        let mut w = vec![0.0; width * height];
        if u >= width || v >= height {
            return Err(Error::OutOfRange(format!("pixel ({u}, {v}) outside {width}x{height}")));
        }
        w[v * width + u] = 1.0;
        Self::from_weights(width, height, w)
    }

    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        Self::from_weights(width, height, vec![1.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.mass[v * self.width + u]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Pixel with the largest mass (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, m) in self.mass.iter().enumerate() {
            if *m > self.mass[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Full-precision binary form: `"RFGD"`, `u32` width, `u32` height,
    /// `u32` reserved (0), then `width * height` little-endian `f64` cells.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(GRID_MAGIC)?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        out.write_all(&0u32.to_le_bytes())?;
        for m in &self.mass {
            out.write_all(&m.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.mass.len());
        self.write_binary(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Reads the binary form. Cells are taken verbatim (no renormalization)
    /// so a write/read pair is bit-exact.
    pub fn from_binary_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::parse(origin, 0, msg.to_string());
        if bytes.len() < 16 || &bytes[..4] != GRID_MAGIC {
            return Err(bad("missing RFGD header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (width, height) = (word(4), word(8));
        let cells = width
            .checked_mul(height)
            .ok_or_else(|| bad("grid dimensions overflow"))?;
        if width == 0 || height == 0 || bytes.len() != 16 + 8 * cells {
            return Err(bad("payload length does not match the header dimensions"));
        }
        let mass: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(bad("negative or non-finite cell"));
        }
        if mass.iter().sum::<f64>() <= 0.0 {
            return Err(Error::AllZeroGrid);
        }
        Ok(Self { width, height, mass })
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_binary_bytes(&bytes, path)
    }
}

/// Symmetric 2x2 covariance in px².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self> {
        let c = Self { xx, xy, yy };
        let (lo, _) = c.eigenvalues();
        if ![xx, xy, yy].iter().all(|v| v.is_finite()) || xx <= 0.0 || lo <= 0.0 {
            return Err(Error::InvalidCovariance);
        }
        Ok(c)
    }

    pub fn diagonal(var_x: f64, var_y: f64) -> Result<Self> {
        Self::new(var_x, 0.0, var_y)
    }

    /// From standard deviations along u and v.
    pub fn from_std(sigma_u: f64, sigma_v: f64) -> Result<Self> {
        Self::diagonal(sigma_u * sigma_u, sigma_v * sigma_v)
    }

    pub fn determinant(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// `(smallest, largest)` eigenvalue.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        (mean - radius, mean + radius)
    }

    /// Precision matrix entries `(a, b, c)` with `Σ^{-1} = [[a, b], [b, c]]`.
    pub fn inverse(&self) -> (f64, f64, f64) {
        let det = self.determinant();
        (self.yy / det, -self.xy / det, self.xx / det)
    }

    /// Multiplies every entry by `factor` (covariance of pixels rescaled by
    /// `sqrt(factor)`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.xx * factor, self.xy * factor, self.yy * factor)
    }

    /// Floors both eigenvalues at `floor`.
    fn floored(xx: f64, xy: f64, yy: f64, floor: f64) -> Self {
        let raw = Self { xx, xy, yy };
        let (lo, hi) = raw.eigenvalues();
        if lo >= floor {
            return raw;
        }
        let (lo_f, hi_f) = (lo.max(floor), hi.max(floor));
        if xy == 0.0 {
            return Self {
                xx: xx.max(floor),
                xy: 0.0,
                yy: yy.max(floor),
            };
        }
        // eigenvector of the largest eigenvalue
        let (ex, ey) = {
            let (vx, vy) = (xy, hi - xx);
            let n = vx.hypot(vy);
            (vx / n, vy / n)
        };
        Self {
            xx: hi_f * ex * ex + lo_f * ey * ey,
            xy: (hi_f - lo_f) * ex * ey,
            yy: hi_f * ey * ey + lo_f * ex * ex,
        }
    }
}

/// Result of projecting a datagram into the image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProjectedDatagram {
    pub pixels: Vec<PixelCoord>,
    /// Index into the datagram of each kept pixel.
    pub source_index: Vec<usize>,
    pub dropped_behind_camera: usize,
    pub dropped_outside_image: usize,
}

/// Projects every signal to the image, dropping the ones that land behind
/// the camera or off the `width x height` pixel grid.
pub fn project_datagram(
    datagram: &RadarDatagram,
    k: &CameraIntrinsics,
    camera_from_radar: &RigidTransform,
    width: usize,
    height: usize,
) -> ProjectedDatagram {
    let mut out = ProjectedDatagram::default();
    for (i, s) in datagram.signals.iter().enumerate() {
        let p = spherical_to_cartesian(&s.spherical());
        match project_to_image(k, camera_from_radar, &p) {
            Ok(px) if px.in_image(width, height) => {
                out.pixels.push(px);
                out.source_index.push(i);
            }
            Ok(_) => out.dropped_outside_image += 1,
            Err(_) => out.dropped_behind_camera += 1,
        }
    }
    out
}

/// Pooled within-group sample covariance of pixel positions.
///
/// Each group (typically the projections of one annotated object) is
/// centered on its own centroid; outer products are pooled and divided by
/// `N - groups`. The result is symmetrized and its eigenvalues floored at
/// [`SIGMA_EIGEN_FLOOR`].
pub fn estimate_sigma(groups: &[Vec<PixelCoord>]) -> Result<Covariance2> {
    let mut n = 0usize;
    let mut used_groups = 0usize;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for g in groups.iter().filter(|g| !g.is_empty()) {
        used_groups += 1;
        n += g.len();
        let inv = 1.0 / g.len() as f64;
        let cu = g.iter().map(|p| p.u).sum::<f64>() * inv;
        let cv = g.iter().map(|p| p.v).sum::<f64>() * inv;
        for p in g {
            let (du, dv) = (p.u - cu, p.v - cv);
            sxx += du * du;
            sxy += du * dv;
            syy += dv * dv;
        }
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} point(s); need at least 2")));
    }
    let dof = n - used_groups;
    if dof == 0 {
        return Err(Error::InsufficientData(
            "every group holds a single point; no within-group spread".into(),
        ));
    }
    let d = dof as f64;
    Ok(Covariance2::floored(sxx / d, sxy / d, syy / d, SIGMA_EIGEN_FLOOR))
}

/// Normalized Gaussian mixture with one unit-weight component per point,
/// evaluated at integer pixel centers.
pub fn rasterize_mixture(
    points: &[PixelCoord],
    sigma: &Covariance2,
    width: usize,
    height: usize,
) -> Result<ProbabilityGrid> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let weighted: Vec<(PixelCoord, f64)> = points.iter().map(|p| (*p, 1.0)).collect();
    rasterize_weighted(&weighted, sigma, width, height)
}

/// Mixture with per-component weights. Components are accumulated in input
/// order, each over the window outside of which its kernel underflows.
pub fn rasterize_weighted(
    components: &[(PixelCoord, f64)],
    sigma: &Covariance2,
    width: usize,
    height: usize,
) -> Result<ProbabilityGrid> {
    if components.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidGrid(format!("empty {width}x{height} grid")));
    }
    if components
        .iter()
        .any(|(p, w)| !p.u.is_finite() || !p.v.is_finite() || !w.is_finite() || *w < 0.0)
    {
        return Err(Error::InvalidGrid("non-finite mixture component".into()));
    }
    let (a, b, c) = sigma.inverse();
    let half_u = (UNDERFLOW_RADIUS_SQ * sigma.xx).sqrt();
    let half_v = (UNDERFLOW_RADIUS_SQ * sigma.yy).sqrt();
    let mut acc = vec![0.0; width * height];
    for (p, weight) in components {
        let u_lo = (p.u - half_u).ceil().max(0.0);
        let u_hi = (p.u + half_u).floor().min(width as f64 - 1.0);
        let v_lo = (p.v - half_v).ceil().max(0.0);
        let v_hi = (p.v + half_v).floor().min(height as f64 - 1.0);
        if u_lo > u_hi || v_lo > v_hi {
            continue;
        }
        for v in v_lo as usize..=v_hi as usize {
            let dv = v as f64 - p.v;
            let row = &mut acc[v * width..(v + 1) * width];
            for (u, cell) in row.iter_mut().enumerate().take(u_hi as usize + 1).skip(u_lo as usize) {
                let du = u as f64 - p.u;
                let q = a * du * du + 2.0 * b * du * dv + c * dv * dv;
                *cell += weight * (-0.5 * q).exp();
            }
        }
    }
    ProbabilityGrid::from_weights(width, height, acc)
}

/// `KL(p || q) = Σ p log(p / q)` after flooring both grids at [`KL_FLOOR`]
/// and renormalizing.
pub fn kl_divergence(p_true: &ProbabilityGrid, q_pred: &ProbabilityGrid) -> Result<f64> {
    if p_true.width != q_pred.width || p_true.height != q_pred.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            p_true.width, p_true.height, q_pred.width, q_pred.height
        )));
    }
    let floor_total = |g: &ProbabilityGrid| g.mass.iter().map(|m| m.max(KL_FLOOR)).sum::<f64>();
    let (zp, zq) = (floor_total(p_true), floor_total(q_pred));
    let kl = p_true
        .mass
        .iter()
        .zip(&q_pred.mass)
        .map(|(p, q)| {
            let p = p.max(KL_FLOOR) / zp;
            let q = q.max(KL_FLOOR) / zq;
            p * (p / q).ln()
        })
        .sum();
    Ok(kl)
}

/// Which form of the relative count loss to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountLossForm {
    /// `(1/m) (Σ (n̂ - n)/n)²`: the square is taken outside the sum, so
    /// over- and under-estimates in different frames cancel.
    #[default]
    SquaredSum,
    /// `(1/m) Σ ((n̂ - n)/n)²`.
    PerFrame,
}

/// Relative count loss over `(predicted, true)` pairs, one per frame.
pub fn count_loss(pairs: &[(f64, i64)], form: CountLossForm) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((_, n)) = pairs.iter().find(|(_, n)| *n <= 0) {
        return Err(Error::NonPositiveCount(*n));
    }
    let rel = pairs.iter().map(|(n_hat, n)| (n_hat - *n as f64) / *n as f64);
    let m = pairs.len() as f64;
    Ok(match form {
        CountLossForm::SquaredSum => rel.sum::<f64>().powi(2) / m,
        CountLossForm::PerFrame => rel.map(|r| r * r).sum::<f64>() / m,
    })
}

/// Combined distribution-predictor loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisLossReport {
    pub kl: f64,
    pub count_loss: f64,
    pub alpha: f64,
    pub total: f64,
}

pub fn total_loss(kl: f64, count: f64, alpha: f64) -> Result<DisLossReport> {
    if !(alpha >= 0.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} must be nonnegative")));
    }
    Ok(DisLossReport {
        kl,
        count_loss: count,
        alpha,
        total: kl + alpha * count,
    })
}

/// How a grid is quantized for export.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExportMode {
    /// 8-bit levels, brightest cell at 255. Suited to viewing and to the
    /// PGM exchange protocol.
    MaxNorm,
    /// 32-bit levels `round(p * (2^32 - 1))`, so `p ≈ level * scale`.
    SumScale,
}

/// Quantized grid plus the factor mapping levels back to probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayscaleExport {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<u32>,
    pub maxval: u32,
    /// `p ≈ level * scale` before renormalization.
    pub scale: f64,
}

impl GrayscaleExport {
    /// 8-bit pixels; only available for [`ExportMode::MaxNorm`].
    pub fn to_gray8(&self) -> Option<crate::image::GrayImage> {
        (self.maxval <= 255).then(|| crate::image::GrayImage {
            width: self.width,
            height: self.height,
            data: self.levels.iter().map(|l| *l as u8).collect(),
        })
    }

    /// Reconstructs the distribution by renormalizing the levels.
    pub fn to_grid(&self) -> Result<ProbabilityGrid> {
        ProbabilityGrid::from_weights(self.width, self.height, self.levels.iter().map(|l| *l as f64).collect())
    }
}

pub fn export_grayscale(grid: &ProbabilityGrid, mode: ExportMode) -> GrayscaleExport {
    let (levels, maxval, scale) = match mode {
        ExportMode::MaxNorm => {
            let max = grid.mass.iter().cloned().fold(0.0, f64::max);
            let levels = grid.mass.iter().map(|m| (m / max * 255.0).round() as u32).collect();
            (levels, 255, max / 255.0)
        }
        ExportMode::SumScale => {
            let full = u32::MAX as f64;
            let levels = grid.mass.iter().map(|m| (m * full).round().min(full) as u32).collect();
            (levels, u32::MAX, 1.0 / full)
        }
    };
    GrayscaleExport {
        width: grid.width,
        height: grid.height,
        levels,
        maxval,
        scale,
    }
}
