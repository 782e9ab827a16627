//! Line-based dataset manifest.
//!
//! ```text
//! # global settings (all optional)
//! radar.delta_azimuth_deg = 1.5
//! radar.delta_elevation_deg = 1.5
//! radar.max_range = 50
//! radar.azimuth_fov_deg = -60, 60
//! radar.elevation_fov_deg = -20, 20
//! radar.n_max = 661
//! sigma = auto            # or `su, sv` (std devs, px) or `sxx, sxy, syy` (px²)
//! seed = 7
//!
//! # one block per frame; paths are relative to the manifest
//! frame = 000000
//! image = images/000000.ppm
//! lidar = lidar/000000.bin
//! calib = calib/000000.txt
//! ego_velocity = 10, 0, 0
//! radar = radar/000000.csv       # optional ground truth
//! objects = objects/000000.csv   # optional annotated regions
//! ```
//!
//! Frames are returned sorted by id, which fixes the output order of every
//! command regardless of how work is scheduled.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::distribution::Covariance2;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::synth::RadarSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaSetting {
    /// Estimate from annotated ground truth.
    Auto,
    Fixed(Covariance2),
}

impl SigmaSetting {
    /// Parses `auto`, `su, sv` (standard deviations) or `sxx, sxy, syy`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SigmaSetting::Auto);
        }
        let vals = parse_floats(s)?;
        let cov = match vals.as_slice() {
            [su, sv] => Covariance2::from_std(*su, *sv),
            [xx, xy, yy] => Covariance2::new(*xx, *xy, *yy),
            _ => return Err(format!("sigma {s:?}: expected `auto`, two std devs or three covariance entries")),
        };
        cov.map(SigmaSetting::Fixed).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameDescriptor {
    pub id: String,
    pub image: PathBuf,
    pub lidar: PathBuf,
    pub calib: PathBuf,
    pub ego_velocity: Vec3,
    pub radar: Option<PathBuf>,
    pub objects: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub dataset: Option<String>,
    pub radar: RadarSpec,
    pub sigma: Option<SigmaSetting>,
    pub seed: Option<u64>,
    pub frames: Vec<FrameDescriptor>,
}

impl Manifest {
    pub fn frame(&self, id: &str) -> Option<&FrameDescriptor> {
        self.frames.iter().find(|f| f.id == id)
    }

    /// Serializes back to manifest text with paths relative to `base_dir`
    /// where possible.
    pub fn to_text(&self) -> String {
        let rel = |p: &Path| p.strip_prefix(&self.base_dir).unwrap_or(p).display().to_string();
        let r = &self.radar;
        let mut out = String::new();
        if let Some(d) = &self.dataset {
            let _ = writeln!(out, "dataset = {d}");
        }
        let _ = writeln!(out, "radar.delta_azimuth_deg = {}", deg(r.delta_azimuth));
        let _ = writeln!(out, "radar.delta_elevation_deg = {}", deg(r.delta_elevation));
        let _ = writeln!(out, "radar.max_range = {}", r.max_range);
        let _ = writeln!(
            out,
            "radar.azimuth_fov_deg = {}, {}",
            deg(r.azimuth_fov.0),
            deg(r.azimuth_fov.1)
        );
        let _ = writeln!(
            out,
            "radar.elevation_fov_deg = {}, {}",
            deg(r.elevation_fov.0),
            deg(r.elevation_fov.1)
        );
        let _ = writeln!(out, "radar.n_max = {}", r.n_max);
        match self.sigma {
            Some(SigmaSetting::Auto) => {
                let _ = writeln!(out, "sigma = auto");
            }
            Some(SigmaSetting::Fixed(c)) => {
                let _ = writeln!(out, "sigma = {}, {}, {}", c.xx, c.xy, c.yy);
            }
            None => {}
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed = {seed}");
        }
        for f in &self.frames {
            let _ = writeln!(out, "\nframe = {}", f.id);
            let _ = writeln!(out, "image = {}", rel(&f.image));
            let _ = writeln!(out, "lidar = {}", rel(&f.lidar));
            let _ = writeln!(out, "calib = {}", rel(&f.calib));
            let v = f.ego_velocity;
            let _ = writeln!(out, "ego_velocity = {}, {}, {}", v.x, v.y, v.z);
            if let Some(p) = &f.radar {
                let _ = writeln!(out, "radar = {}", rel(p));
            }
            if let Some(p) = &f.objects {
                let _ = writeln!(out, "objects = {}", rel(p));
            }
        }
        out
    }
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{t:?} is not a finite number"))
        })
        .collect()
}

#[derive(Default)]
struct PendingFrame {
    id: String,
    line: usize,
    keys: BTreeMap<&'static str, (usize, String)>,
}

const FRAME_KEYS: [&str; 6] = ["image", "lidar", "calib", "ego_velocity", "radar", "objects"];
const REQUIRED: [&str; 4] = ["image", "lidar", "calib", "ego_velocity"];

/// Shortest decimal degree value that reads back as exactly `radians`.
fn deg(radians: f64) -> String {
    let d = radians.to_degrees();
    (0..=15)
        .map(|places| format!("{d:.places$}"))
        .find(|t| t.parse::<f64>().is_ok_and(|v| v.to_radians() == radians))
        .map(|t| if t.contains('.') { t.trim_end_matches('0').trim_end_matches('.').to_string() } else { t })
        .unwrap_or_else(|| d.to_string())
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<Manifest> {
    let base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut radar = RadarSpec::default();
    let mut dataset = None;
    let mut sigma = None;
    let mut seed = None;
    let mut seen_global: BTreeMap<String, usize> = BTreeMap::new();
    let mut pending: Vec<PendingFrame> = Vec::new();
    let err = |line: usize, msg: String| Error::parse(origin, line, msg);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, format!("expected `key = value`, got {content:?}")))?;
        if value.is_empty() {
            return Err(err(line, format!("empty value for {key:?}")));
        }
        if key == "frame" {
            if pending.iter().any(|f| f.id == value) {
                return Err(err(line, format!("duplicate frame id {value:?}")));
            }
            pending.push(PendingFrame {
                id: value.to_string(),
                line,
                ..Default::default()
            });
            continue;
        }
        if let Some(frame) = pending.last_mut() {
            let slot = FRAME_KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| err(line, format!("unknown frame key {key:?}")))?;
            if frame.keys.insert(slot, (line, value.to_string())).is_some() {
                return Err(err(line, format!("duplicate key {key:?} in frame {:?}", frame.id)));
            }
            continue;
        }
        if seen_global.insert(key.to_string(), line).is_some() {
            return Err(err(line, format!("duplicate key {key:?}")));
        }
        let floats = || parse_floats(value).map_err(|m| err(line, m));
        let scalar = || -> Result<f64> {
            match floats()?.as_slice() {
                [x] => Ok(*x),
                _ => Err(err(line, format!("{key} expects one number"))),
            }
        };
        let pair = || -> Result<(f64, f64)> {
            match floats()?.as_slice() {
                [a, b] if a < b => Ok((a.to_radians(), b.to_radians())),
                _ => Err(err(line, format!("{key} expects `min, max` with min < max"))),
            }
        };
        match key {
            "dataset" => dataset = Some(value.to_string()),
            "radar.delta_azimuth_deg" => radar.delta_azimuth = scalar()?.to_radians(),
            "radar.delta_elevation_deg" => radar.delta_elevation = scalar()?.to_radians(),
            "radar.max_range" => radar.max_range = scalar()?,
            "radar.azimuth_fov_deg" => radar.azimuth_fov = pair()?,
            "radar.elevation_fov_deg" => radar.elevation_fov = pair()?,
            "radar.n_max" => {
                radar.n_max = value
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| err(line, format!("n_max {value:?} must be a positive integer")))?
            }
            "sigma" => sigma = Some(SigmaSetting::parse(value).map_err(|m| err(line, m))?),
            "seed" => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| err(line, format!("seed {value:?} is not an unsigned integer")))?,
                )
            }
            other => return Err(err(line, format!("unknown key {other:?}"))),
        }
    }
    radar.validate().map_err(|m| err(0, m))?;

    let mut frames = Vec::with_capacity(pending.len());
    for f in pending {
        for req in REQUIRED {
            if !f.keys.contains_key(req) {
                return Err(err(f.line, format!("frame {:?} is missing required key {req:?}", f.id)));
            }
        }
        let path = |k: &str| f.keys.get(k).map(|(_, v)| base_dir.join(v));
        let (v_line, v_text) = &f.keys["ego_velocity"];
        let ego = match parse_floats(v_text).map_err(|m| err(*v_line, m))?.as_slice() {
            [x, y, z] => Vec3::new(*x, *y, *z),
            _ => return Err(err(*v_line, "ego_velocity expects three numbers".into())),
        };
        frames.push(FrameDescriptor {
            id: f.id.clone(),
            image: path("image").unwrap(),
            lidar: path("lidar").unwrap(),
            calib: path("calib").unwrap(),
            ego_velocity: ego,
            radar: path("radar"),
            objects: path("objects"),
        });
    }
    frames.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Manifest {
        base_dir,
        dataset,
        radar,
        sigma,
        seed,
        frames,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    parse_manifest(&super::read_to_string(path)?, path)
}
