//! Frame inputs, radar datagrams and every on-disk format the toolchain
//! reads or writes.

mod calibration;
mod datagram_csv;
mod lidar;
mod manifest;
mod objects;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calibration::{format_calibration, load_calibration, parse_calibration, Calibration};
pub use datagram_csv::{datagram_to_csv, parse_datagram_csv, read_datagram_csv, write_datagram_csv};
pub use lidar::{encode_lidar_bin, load_lidar_bin, parse_lidar_bin};
pub use manifest::{load_manifest, parse_manifest, FrameDescriptor, Manifest, SigmaSetting};
pub use objects::{format_objects_csv, load_objects_csv, parse_objects_csv};

use crate::error::Result;
use crate::geometry::{SphericalPoint, Vec3};
use crate::image::{load_image, RgbImage};
use crate::synth::{EgoState, ObjectVelocityMap};

/// One radar reflection: range, azimuth, elevation, Doppler velocity
/// (positive = receding) and signal strength in dataset units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarSignal {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub v: f64,
    pub rss: Option<f64>,
}

impl RadarSignal {
    pub fn spherical(&self) -> SphericalPoint {
        SphericalPoint::new(self.r, self.theta, self.phi)
    }

    /// Describes the first violated field invariant, if any.
    pub fn violation(&self) -> Option<String> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Some(format!("r = {} must be positive", self.r));
        }
        if !(self.theta > -PI && self.theta <= PI) {
            return Some(format!("theta = {} outside (-pi, pi]", self.theta));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&self.phi) {
            return Some(format!("phi = {} outside [-pi/2, pi/2]", self.phi));
        }
        if !self.v.is_finite() {
            return Some(format!("v = {} is not finite", self.v));
        }
        if let Some(a) = self.rss {
            if !a.is_finite() {
                return Some(format!("rss = {a} is not finite"));
            }
        }
        None
    }
}

/// All reflections reported for one frame, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadarDatagram {
    pub frame_id: String,
    pub signals: Vec<RadarSignal>,
}

impl RadarDatagram {
    pub fn new(frame_id: impl Into<String>, signals: Vec<RadarSignal>) -> Self {
        Self {
            frame_id: frame_id.into(),
            signals,
        }
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// Everything known about one time step.
#[derive(Clone, Debug)]
pub struct FrameBundle {
    pub id: String,
    pub image: RgbImage,
    /// Lidar points in the lidar frame.
    pub lidar: Vec<Vec3>,
    pub ego: EgoState,
    pub calibration: Calibration,
    pub ground_truth: Option<RadarDatagram>,
    pub objects: ObjectVelocityMap,
}

impl FrameBundle {
    /// Loads and validates every file referenced by `desc`.
    pub fn load(desc: &FrameDescriptor) -> Result<Self> {
        let image = load_image(&desc.image)?;
        let lidar = load_lidar_bin(&desc.lidar)?;
        let calibration = load_calibration(&desc.calib)?;
        let ground_truth = desc
            .radar
            .as_deref()
            .map(|p| read_datagram_csv(p).map(|d| RadarDatagram::new(desc.id.clone(), d.signals)))
            .transpose()?;
        let objects = match &desc.objects {
            Some(p) => load_objects_csv(p)?,
            None => ObjectVelocityMap::default(),
        };
        Ok(Self {
            id: desc.id.clone(),
            image,
            lidar,
            ego: EgoState::new(desc.ego_velocity),
            calibration,
            ground_truth,
            objects,
        })
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    /// Lidar cloud expressed in the radar Cartesian frame.
    pub fn lidar_in_radar(&self) -> Vec<Vec3> {
        let t = &self.calibration.lidar_to_radar;
        self.lidar.iter().map(|p| t.transform_point(p)).collect()
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| crate::error::Error::io(path, e))
}
