//! Scoring synthesized datagrams against ground truth.

use serde::{Deserialize, Serialize};

use crate::dataset::{FrameBundle, RadarDatagram, RadarSignal};
use crate::distribution::{kl_divergence, project_datagram, rasterize_mixture, Covariance2, ProbabilityGrid};
use crate::error::{Error, Result};
use crate::geometry::spherical_to_cartesian;
use crate::predictors::GridView;
use crate::synth::SynthesisReport;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub outside_fov: usize,
    pub no_lidar_support: usize,
    pub beyond_max_range: usize,
}

impl DropCounts {
    pub fn from_report(r: &SynthesisReport) -> Self {
        Self {
            outside_fov: r.dropped_outside_fov,
            no_lidar_support: r.dropped_no_lidar_support,
            beyond_max_range: r.dropped_beyond_max_range,
        }
    }

    fn add(&mut self, o: &DropCounts) {
        self.outside_fov += o.outside_fov;
        self.no_lidar_support += o.no_lidar_support;
        self.beyond_max_range += o.beyond_max_range;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub frame_id: String,
    pub gt_count: usize,
    pub pred_count: usize,
    /// `KL(ground truth ‖ prediction)` of the rasterized datagrams.
    pub kl: f64,
    /// `(n̂ − n) / n`.
    pub count_rel_error: f64,
    /// Normalized squared strength error, when both sides carry strengths.
    pub rss_nmse: Option<f64>,
    pub drops: DropCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_kl: f64,
    pub mean_count_rel_error: f64,
    pub mean_rss_nmse: Option<f64>,
    pub total_drops: DropCounts,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = rows.len() as f64;
        let rss: Vec<f64> = rows.iter().filter_map(|r| r.rss_nmse).collect();
        let mut total_drops = DropCounts::default();
        rows.iter().for_each(|r| total_drops.add(&r.drops));
        Ok(Self {
            mean_kl: rows.iter().map(|r| r.kl).sum::<f64>() / n,
            mean_count_rel_error: rows.iter().map(|r| r.count_rel_error).sum::<f64>() / n,
            mean_rss_nmse: (!rss.is_empty()).then(|| rss.iter().sum::<f64>() / rss.len() as f64),
            total_drops,
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_id,gt_count,pred_count,kl,count_rel_error,rss_nmse,drop_outside_fov,drop_no_lidar_support,drop_beyond_max_range\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.frame_id,
                r.gt_count,
                r.pred_count,
                r.kl,
                r.count_rel_error,
                opt(r.rss_nmse),
                r.drops.outside_fov,
                r.drops.no_lidar_support,
                r.drops.beyond_max_range
            ));
        }
        let d = &self.total_drops;
        out.push_str(&format!(
            "mean,,,{},{},{},{},{},{}\n",
            self.mean_kl,
            self.mean_count_rel_error,
            opt(self.mean_rss_nmse),
            d.outside_fov,
            d.no_lidar_support,
            d.beyond_max_range
        ));
        out
    }

    pub fn summary(&self) -> String {
        let rss = self.mean_rss_nmse.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        format!(
            "{} frame(s): mean KL {:.6}, mean count error {:+.4}, mean RSS nMSE {rss}, drops fov/support/range {}/{}/{}",
            self.rows.len(),
            self.mean_kl,
            self.mean_count_rel_error,
            self.total_drops.outside_fov,
            self.total_drops.no_lidar_support,
            self.total_drops.beyond_max_range
        )
    }
}

/// Rasterizes a datagram's image projections. A datagram with nothing in
/// view yields the uniform grid.
pub fn rasterize_datagram(frame: &FrameBundle, d: &RadarDatagram, sigma: &Covariance2, view: &GridView) -> Result<ProbabilityGrid> {
    let projected = project_datagram(d, &view.intrinsics, &frame.calibration.radar_to_camera, view.width, view.height);
    if projected.pixels.is_empty() {
        return ProbabilityGrid::uniform(view.width, view.height);
    }
    rasterize_mixture(&projected.pixels, &view.sigma(sigma)?, view.width, view.height)
}

/// Mean of `((a − â)/(a_max − a_min))²` over predicted signals with a
/// strength, each paired with the nearest ground-truth signal in space.
pub fn rss_nmse(pred: &[RadarSignal], gt: &[RadarSignal], range: (f64, f64)) -> Result<Option<f64>> {
    let (a_min, a_max) = range;
    if !(a_max > a_min) {
        return Err(Error::DegenerateRange { a_min, a_max });
    }
    let gt: Vec<_> = gt
        .iter()
        .filter_map(|s| s.rss.map(|a| (spherical_to_cartesian(&s.spherical()), a)))
        .collect();
    if gt.is_empty() {
        return Ok(None);
    }
    let errs: Vec<f64> = pred
        .iter()
        .filter_map(|s| {
            let a_hat = s.rss?;
            let p = spherical_to_cartesian(&s.spherical());
            let (_, a) = gt
                .iter()
                .min_by(|x, y| (x.0 - p).norm_squared().total_cmp(&(y.0 - p).norm_squared()))
                .expect("non-empty");
            Some(((a - a_hat) / (a_max - a_min)).powi(2))
        })
        .collect();
    Ok((!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64))
}

/// Strength range of the ground truth across frames, if any signal has one.
pub fn rss_range<'a, I>(datagrams: I) -> Option<(f64, f64)>
where
    I: IntoIterator<Item = &'a RadarDatagram>,
{
    datagrams
        .into_iter()
        .flat_map(|d| d.signals.iter().filter_map(|s| s.rss))
        .fold(None, |acc, a| match acc {
            None => Some((a, a)),
            Some((lo, hi)) => Some((lo.min(a), hi.max(a))),
        })
}

/// Scores one frame. `frame.ground_truth` is the reference.
pub fn evaluate_frame(
    frame: &FrameBundle,
    pred: &RadarDatagram,
    sigma: &Covariance2,
    view: &GridView,
    rss_norm: Option<(f64, f64)>,
    report: Option<&SynthesisReport>,
) -> Result<EvalRow> {
    let gt = frame.ground_truth.as_ref().filter(|d| !d.is_empty()).ok_or_else(|| Error::NoGroundTruth(frame.id.clone()))?;
    if pred.frame_id != frame.id {
        return Err(Error::FrameIdMismatch(format!("prediction {} vs ground truth {}", pred.frame_id, frame.id)));
    }
    let p = rasterize_datagram(frame, gt, sigma, view)?;
    let q = rasterize_datagram(frame, pred, sigma, view)?;
    let rss = match rss_norm {
        Some(range) if range.1 > range.0 => rss_nmse(&pred.signals, &gt.signals, range)?,
        _ => None,
    };
    Ok(EvalRow {
        frame_id: frame.id.clone(),
        gt_count: gt.len(),
        pred_count: pred.len(),
        kl: kl_divergence(&p, &q)?,
        count_rel_error: (pred.len() as f64 - gt.len() as f64) / gt.len() as f64,
        rss_nmse: rss,
        drops: report.map(DropCounts::from_report).unwrap_or_default(),
    })
}

/// Pairs predictions with frames by id. Every prediction must have a frame
/// and at least one id must be shared.
pub fn match_frames<'a>(frames: &'a [FrameBundle], preds: &'a [RadarDatagram]) -> Result<Vec<(&'a FrameBundle, &'a RadarDatagram)>> {
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for p in preds {
        match frames.iter().find(|f| f.id == p.frame_id) {
            Some(f) => pairs.push((f, p)),
            None => missing.push(p.frame_id.as_str()),
        }
    }
    if !missing.is_empty() || pairs.is_empty() {
        return Err(Error::FrameIdMismatch(if missing.is_empty() {
            "no predicted frames".into()
        } else {
            format!("no ground truth for predicted frame(s) {}", missing.join(", "))
        }));
    }
    Ok(pairs)
}
