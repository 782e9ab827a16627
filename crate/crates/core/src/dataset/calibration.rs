//! Sensor calibration text files.
//!
//! ```text
//! K:    fx s cx  0 fy cy  0 0 1          # 9 values, row-major
//! T_LD: <16 values, row-major>           # lidar -> radar
//! T_CD: <16 values, row-major>           # camera -> radar
//! ```
//!
//! Values may be separated by whitespace or commas; `#` starts a comment.

use std::path::Path;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Mat3, RigidTransform};

/// Rotations read from text must be orthonormal to this tolerance.
pub const CALIBRATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub lidar_to_radar: RigidTransform,
    pub camera_to_radar: RigidTransform,
    /// Cached inverse of `camera_to_radar`.
    pub radar_to_camera: RigidTransform,
}

impl Calibration {
    pub fn new(intrinsics: CameraIntrinsics, lidar_to_radar: RigidTransform, camera_to_radar: RigidTransform) -> Self {
        Self {
            intrinsics,
            lidar_to_radar,
            camera_to_radar,
            radar_to_camera: camera_to_radar.inverse(),
        }
    }

    /// Rotation taking camera-frame directions into the radar frame.
    pub fn radar_from_camera_rotation(&self) -> &Mat3 {
        self.camera_to_radar.rotation()
    }
}

pub fn parse_calibration(text: &str, origin: &Path) -> Result<Calibration> {
    let mut k: Option<(usize, Vec<f64>)> = None;
    let mut t_ld: Option<(usize, Vec<f64>)> = None;
    let mut t_cd: Option<(usize, Vec<f64>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(origin, line_no, format!("expected `KEY: values`, got {line:?}")))?;
        let values = rest
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, line_no, format!("{s:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let slot = match key.trim() {
            "K" => &mut k,
            "T_LD" => &mut t_ld,
            "T_CD" => &mut t_cd,
            other => return Err(Error::parse(origin, line_no, format!("unknown key {other:?}"))),
        };
        if slot.is_some() {
            return Err(Error::parse(origin, line_no, format!("duplicate key {:?}", key.trim())));
        }
        *slot = Some((line_no, values));
    }
    let take = |slot: Option<(usize, Vec<f64>)>, name: &str, n: usize| -> Result<(usize, Vec<f64>)> {
        let (line, v) = slot.ok_or_else(|| Error::parse(origin, 0, format!("missing key {name:?}")))?;
        if v.len() != n {
            return Err(Error::parse(origin, line, format!("{name} needs {n} values, found {}", v.len())));
        }
        Ok((line, v))
    };
    let (k_line, k) = take(k, "K", 9)?;
    let (ld_line, t_ld) = take(t_ld, "T_LD", 16)?;
    let (cd_line, t_cd) = take(t_cd, "T_CD", 16)?;
    let intrinsics = CameraIntrinsics::from_matrix(&Mat3::from_row_slice(&k)).map_err(|e| with_line(e, origin, k_line))?;
    let lidar_to_radar = RigidTransform::from_homogeneous(&Matrix4::from_row_slice(&t_ld), CALIBRATION_TOLERANCE)
        .map_err(|e| with_line(e, origin, ld_line))?;
    let camera_to_radar = RigidTransform::from_homogeneous(&Matrix4::from_row_slice(&t_cd), CALIBRATION_TOLERANCE)
        .map_err(|e| with_line(e, origin, cd_line))?;
    Ok(Calibration::new(intrinsics, lidar_to_radar, camera_to_radar))
}

// Validation errors keep their kind; only parse errors gain a location.
fn with_line(e: Error, origin: &Path, line: usize) -> Error {
    match e {
        Error::Parse { message, .. } => Error::parse(origin, line, message),
        other => other,
    }
}

pub fn load_calibration(path: &Path) -> Result<Calibration> {
    parse_calibration(&super::read_to_string(path)?, path)
}

pub fn format_calibration(c: &Calibration) -> String {
    let k = c.intrinsics.matrix();
    let row_major = |m: &[f64]| m.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ");
    let k_vals: Vec<f64> = (0..3).flat_map(|r| (0..3).map(move |col| k[(r, col)])).collect();
    let h = |t: &RigidTransform| {
        let m = t.to_homogeneous();
        (0..4).flat_map(|r| (0..4).map(move |col| m[(r, col)])).collect::<Vec<f64>>()
    };
    format!(
        "K: {}\nT_LD: {}\nT_CD: {}\n",
        row_major(&k_vals),
        row_major(&h(&c.lidar_to_radar)),
        row_major(&h(&c.camera_to_radar))
    )
}
