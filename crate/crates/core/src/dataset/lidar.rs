//! KITTI-style lidar scans: little-endian `f32` records `(x, y, z, intensity)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

const RECORD: usize = 16;

/// Decodes a scan; intensity is discarded.
pub fn parse_lidar_bin(bytes: &[u8], origin: &Path) -> Result<Vec<Vec3>> {
    if bytes.len() % RECORD != 0 {
        return Err(Error::TruncatedFile {
            path: origin.to_path_buf(),
            len: bytes.len(),
            record: RECORD,
        });
    }
    Ok(bytes
        .chunks_exact(RECORD)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()) as f64;
            Vec3::new(f(0), f(1), f(2))
        })
        .collect())
}

pub fn load_lidar_bin(path: &Path) -> Result<Vec<Vec3>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_lidar_bin(&bytes, path)
}

/// Encodes points with the given per-point intensity.
pub fn encode_lidar_bin(points: &[Vec3], intensity: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * RECORD);
    for (i, p) in points.iter().enumerate() {
        for c in [p.x as f32, p.y as f32, p.z as f32, intensity.get(i).copied().unwrap_or(0.0)] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}
