//! Coordinate frames, rigid transforms and the pinhole camera.
//!
//! Frames used throughout the crate:
//!
//! * `{D}`: radar Cartesian frame, x forward, z up, right-handed. Radar
//!   signals are reported in its spherical counterpart (range, azimuth measured
//!   from +x toward +y, elevation from the x-y plane toward +z).
//! * `{L}`: lidar frame.
//! * `{C}`: camera optical frame, z along the optical axis, x right, y down.
//! * `{I}`: image plane, 0-based pixel coordinates with pixel centers at
//!   integer positions.
//!
//! Angles are radians everywhere; degrees only appear at the I/O boundary.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Camera-frame depth below which a point cannot be projected.
pub const MIN_CAMERA_DEPTH: f64 = 1e-9;

/// A point in the radar's spherical frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalPoint {
    /// Range in meters.
    pub r: f64,
    /// Azimuth in radians, `(-pi, pi]`.
    pub theta: f64,
    /// Elevation in radians, `[-pi/2, pi/2]`.
    pub phi: f64,
}

impl SphericalPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    pub fn is_valid(&self) -> bool {
        self.r.is_finite()
            && self.r >= 0.0
            && self.theta > -PI
            && self.theta <= PI
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.phi)
    }
}

/// Continuous pixel coordinates in `{I}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Whether the coordinate falls on a pixel of a `width x height` image,
    /// i.e. it rounds to a valid 0-based index.
    pub fn in_image(&self, width: usize, height: usize) -> bool {
        self.u >= -0.5 && self.u < width as f64 - 0.5 && self.v >= -0.5 && self.v < height as f64 - 0.5
    }

    /// Nearest integer pixel, assuming [`PixelCoord::in_image`] holds.
    pub fn to_index(&self) -> (usize, usize) {
        (self.u.round().max(0.0) as usize, self.v.round().max(0.0) as usize)
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn spherical_to_cartesian(s: &SphericalPoint) -> Vec3 {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (sin_p, cos_p) = s.phi.sin_cos();
    Vec3::new(s.r * cos_p * cos_t, s.r * cos_p * sin_t, s.r * sin_p)
}

/// Inverse of [`spherical_to_cartesian`]: `theta = atan2(y, x)`,
/// `phi = asin(z / |p|)`.
pub fn cartesian_to_spherical(p: &Vec3) -> Result<SphericalPoint> {
    let r = p.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ZeroVector);
    }
    let mut theta = p.y.atan2(p.x);
    if theta <= -PI {
        theta = PI;
    }
    let phi = (p.z / r).clamp(-1.0, 1.0).asin();
    Ok(SphericalPoint { r, theta, phi })
}

/// Proper rigid motion `p' = R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    /// Builds a transform, requiring `R^T R = I` and `det R = 1` to within
    /// [`ROTATION_TOLERANCE`].
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation, ROTATION_TOLERANCE)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::NonRigidTransform("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    /// Accepts rotations that are orthonormal only to within `tolerance`
    /// (e.g. printed with limited precision) and projects them onto SO(3).
    pub fn from_approximate(rotation: Mat3, translation: Vec3, tolerance: f64) -> Result<Self> {
        check_rotation(&rotation, tolerance)?;
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        Self::new(u * v_t, translation)
    }

    /// Parses a row-major homogeneous 4x4 matrix.
    pub fn from_homogeneous(m: &Matrix4<f64>, tolerance: f64) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        let expected = [0.0, 0.0, 0.0, 1.0];
        if bottom.iter().zip(expected).any(|(a, b)| (a - b).abs() > tolerance) {
            return Err(Error::NonRigidTransform(format!(
                "bottom row {bottom:?} is not [0, 0, 0, 1]"
            )));
        }
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::from_approximate(rotation, translation, tolerance)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about the z axis.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vec3::zeros(),
        }
    }

    /// Camera-from-radar transform for a camera whose optical center sits at
    /// `camera_position` in `{D}` and looks along the radar's +x axis.
    pub fn camera_from_radar_aligned(camera_position: Vec3) -> Self {
        // rows: camera x = -radar y, camera y = -radar z, camera z = radar x
        let rotation = Mat3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        Self {
            rotation,
            translation: -(rotation * camera_position),
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

fn check_rotation(r: &Mat3, tolerance: f64) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::NonRigidTransform("non-finite rotation".into()));
    }
    let orth = (r.transpose() * r - Mat3::identity()).abs().max();
    if orth > tolerance {
        return Err(Error::NonRigidTransform(format!(
            "R^T R deviates from identity by {orth:.3e}"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tolerance {
        return Err(Error::NonRigidTransform(format!("det(R) = {det:.6}")));
    }
    Ok(())
}

/// Pinhole intrinsics `K = [[fx, s, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::with_skew(fx, fy, cx, cy, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, skew };
        if ![fx, fy, cx, cy, skew].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite entry".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {fx}, fy = {fy})"
            )));
        }
        Ok(k)
    }

    /// Parses a row-major 3x3 matrix; the last row must be `[0, 0, 1]` and
    /// `K[1][0]` must vanish.
    pub fn from_matrix(m: &Mat3) -> Result<Self> {
        let tail = [m[(1, 0)], m[(2, 0)], m[(2, 1)], m[(2, 2)] - 1.0];
        if tail.iter().any(|v| v.abs() > 1e-12) {
            return Err(Error::InvalidIntrinsics(
                "matrix is not upper triangular with K[2][2] = 1".into(),
            ));
        }
        Self::with_skew(m[(0, 0)], m[(1, 1)], m[(0, 2)], m[(1, 2)], m[(0, 1)])
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Intrinsics of the same camera imaged at `factor` times the resolution.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        // pixel centers sit at integers, so the principal point maps as
        // (c + 0.5) * factor - 0.5
        Self::with_skew(
            self.fx * factor,
            self.fy * factor,
            (self.cx + 0.5) * factor - 0.5,
            (self.cy + 0.5) * factor - 0.5,
            self.skew * factor,
        )
    }

    /// `K^{-1} [u, v, 1]^T`, evaluated in closed form.
    pub fn unproject(&self, px: &PixelCoord) -> Vec3 {
        let y = (px.v - self.cy) / self.fy;
        let x = (px.u - self.cx - self.skew * y) / self.fx;
        Vec3::new(x, y, 1.0)
    }
}

/// Projects a radar-frame point into the image: `[u, v, 1]^T ∝ K (R p + t)`.
pub fn project_to_image(
    k: &CameraIntrinsics,
    camera_from_radar: &RigidTransform,
    p: &Vec3,
) -> Result<PixelCoord> {
    let pc = camera_from_radar.transform_point(p);
    if pc.z <= MIN_CAMERA_DEPTH {
        return Err(Error::BehindCamera { depth: pc.z });
    }
    let x = pc.x / pc.z;
    let y = pc.y / pc.z;
    Ok(PixelCoord {
        u: k.fx * x + k.skew * y + k.cx,
        v: k.fy * y + k.cy,
    })
}

/// Direction in `{D}` of the camera ray through `px`: `R_D_from_C K^{-1} [u, v, 1]^T`.
pub fn back_project_ray(k: &CameraIntrinsics, radar_from_camera: &Mat3, px: &PixelCoord) -> Vec3 {
    radar_from_camera * k.unproject(px)
}
