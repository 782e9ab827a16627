//! Turning sampled pixels into 4D radar signals.
//!
//! For each pixel drawn from a predicted distribution: back-project it to
//! azimuth/elevation, take the range as the mean range of the lidar points
//! within one radar resolution cell of that direction, and compute the
//! Doppler velocity as the projection of the relative object velocity on the
//! ray.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dataset::{FrameBundle, RadarDatagram, RadarSignal};
use crate::error::{Error, Result};
use crate::geometry::{back_project_ray, cartesian_to_spherical, spherical_to_cartesian, wrap_angle, CameraIntrinsics, Mat3, PixelCoord, RigidTransform, SphericalPoint, Vec3};
use crate::predictors::DistributionPrediction;
use crate::sampler::{sample_signals, SeededRng};

/// Simulated radar characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarSpec {
    /// Horizontal angular resolution, radians.
    pub delta_azimuth: f64,
    /// Vertical angular resolution, radians.
    pub delta_elevation: f64,
    /// Signals farther than this are discarded, meters.
    pub max_range: f64,
    /// `(min, max)` azimuth, radians.
    pub azimuth_fov: (f64, f64),
    /// `(min, max)` elevation, radians.
    pub elevation_fov: (f64, f64),
    /// Maximum signal count per frame; scales normalized count predictions.
    pub n_max: usize,
}

impl Default for RadarSpec {
    fn default() -> Self {
        Self::vod()
    }
}

impl RadarSpec {
    fn with_resolution(delta_deg: f64, n_max: usize) -> Self {
        Self {
            delta_azimuth: delta_deg.to_radians(),
            delta_elevation: delta_deg.to_radians(),
            max_range: 50.0,
            azimuth_fov: (-60f64.to_radians(), 60f64.to_radians()),
            elevation_fov: (-30f64.to_radians(), 30f64.to_radians()),
            n_max,
        }
    }

    /// ZF FRGen21 as recorded in View-of-Delft: 1.5° cells, up to 661 signals.
    pub fn vod() -> Self {
        Self::with_resolution(1.5, 661)
    }

    /// Astyx 6455: 1.5° cells (estimated from data), up to 3629 signals.
    pub fn astyx() -> Self {
        Self::with_resolution(1.5, 3629)
    }

    /// Oculii Eagle as recorded in MSC-RAD4R: 1.0° cells, up to 2462 signals.
    pub fn msc() -> Self {
        Self::with_resolution(1.0, 2462)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.delta_azimuth > 0.0 && self.delta_elevation > 0.0) {
            return Err("angular resolutions must be positive".into());
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err("max_range must be positive".into());
        }
        let (a0, a1) = self.azimuth_fov;
        let (e0, e1) = self.elevation_fov;
        if !(a0 < a1 && a0 >= -PI && a1 <= PI && e0 < e1 && e0 >= -FRAC_PI_2 && e1 <= FRAC_PI_2) {
            return Err("field of view bounds are inverted or out of range".into());
        }
        if self.n_max == 0 {
            return Err("n_max must be positive".into());
        }
        Ok(())
    }

    pub fn contains_angles(&self, theta: f64, phi: f64) -> bool {
        (self.azimuth_fov.0..=self.azimuth_fov.1).contains(&theta) && (self.elevation_fov.0..=self.elevation_fov.1).contains(&phi)
    }
}

/// Radar platform velocity in the radar Cartesian frame, m/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub velocity: Vec3,
}

impl EgoState {
    pub fn new(velocity: Vec3) -> Self {
        Self { velocity }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Image region whose reflections move with a known velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRegion {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    /// Velocity in the radar Cartesian frame, m/s.
    pub velocity: Vec3,
}

impl ObjectRegion {
    pub fn contains(&self, px: &PixelCoord) -> bool {
        px.u >= self.u_min && px.u <= self.u_max && px.v >= self.v_min && px.v <= self.v_max
    }
}

/// Object velocities by image region; pixels outside every region belong
/// to the static world. The first matching region wins.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectVelocityMap {
    regions: Vec<ObjectRegion>,
}

impl ObjectVelocityMap {
    pub fn new(regions: Vec<ObjectRegion>) -> Self {
        Self { regions }
    }

    pub fn regions(&self) -> &[ObjectRegion] {
        &self.regions
    }

    pub fn velocity_at(&self, px: &PixelCoord) -> Vec3 {
        self.regions
            .iter()
            .find(|r| r.contains(px))
            .map(|r| r.velocity)
            .unwrap_or_else(Vec3::zeros)
    }
}

/// Azimuth and elevation of the camera ray through `px`, in the radar frame.
pub fn pixel_to_angles(px: &PixelCoord, k: &CameraIntrinsics, radar_from_camera: &Mat3) -> (f64, f64) {
    let d = back_project_ray(k, radar_from_camera, px);
    // K^{-1}[u, v, 1] has unit z, so the ray is never zero
    let s = cartesian_to_spherical(&d).expect("back-projected ray is nonzero");
    (s.theta, s.phi)
}

/// Transforms lidar points into the radar frame and converts them to
/// spherical coordinates. Points at the radar origin are dropped and counted.
pub fn lidar_to_radar_spherical(cloud: &[Vec3], lidar_to_radar: &RigidTransform) -> (Vec<SphericalPoint>, usize) {
    let mut dropped = 0;
    let mut out = Vec::with_capacity(cloud.len());
    for p in cloud {
        let q = lidar_to_radar.transform_point(p);
        if q.norm() < 1e-9 {
            dropped += 1;
            continue;
        }
        match cartesian_to_spherical(&q) {
            Ok(s) => out.push(s),
            Err(_) => dropped += 1,
        }
    }
    (out, dropped)
}

fn within(p: &SphericalPoint, theta: f64, phi: f64, d_az: f64, d_el: f64) -> bool {
    wrap_angle(p.theta - theta).abs() <= d_az && (p.phi - phi).abs() <= d_el
}

/// Indices of the points within `d_az` (wrapped) and `d_el` of `(theta, phi)`,
/// by linear scan.
pub fn neighbor_query_with(cloud: &[SphericalPoint], theta: f64, phi: f64, d_az: f64, d_el: f64) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&i| within(&cloud[i], theta, phi, d_az, d_el))
        .collect()
}

/// Points within one resolution cell of `(theta, phi)`.
pub fn neighbor_query<'a>(cloud: &'a [SphericalPoint], theta: f64, phi: f64, spec: &RadarSpec) -> Vec<&'a SphericalPoint> {
    neighbor_query_with(cloud, theta, phi, spec.delta_azimuth, spec.delta_elevation)
        .into_iter()
        .map(|i| &cloud[i])
        .collect()
}

/// Bucket grid over (azimuth, elevation) for neighborhood queries. Results
/// match [`neighbor_query_with`] exactly, including index order.
pub struct AngularIndex<'a> {
    points: &'a [SphericalPoint],
    cell: f64,
    n_az: usize,
    n_el: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> AngularIndex<'a> {
    pub fn new(points: &'a [SphericalPoint], cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let n_az = ((2.0 * PI) / cell).ceil().max(1.0) as usize;
        let n_el = (PI / cell).ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); n_az * n_el];
        let mut index = Self {
            points,
            cell,
            n_az,
            n_el,
            buckets: Vec::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let (a, e) = index.bucket_of(p.theta, p.phi);
            buckets[e * n_az + a].push(i as u32);
        }
        index.buckets = buckets;
        index
    }

    fn bucket_of(&self, theta: f64, phi: f64) -> (usize, usize) {
        let a = (((wrap_angle(theta) + PI) / self.cell).floor().max(0.0) as usize).min(self.n_az - 1);
        let e = (((phi + FRAC_PI_2) / self.cell).floor().max(0.0) as usize).min(self.n_el - 1);
        (a, e)
    }

    pub fn query(&self, theta: f64, phi: f64, d_az: f64, d_el: f64) -> Vec<usize> {
        let (a0, e0) = self.bucket_of(theta, phi);
        // +2 covers floor rounding on both ends and the partial seam bucket
        let ra = (d_az / self.cell).floor() as usize + 2;
        let re = (d_el / self.cell).floor() as usize + 2;
        let az_buckets: Vec<usize> = if 2 * ra + 1 >= self.n_az {
            (0..self.n_az).collect()
        } else {
            (0..=2 * ra).map(|k| (a0 + self.n_az + k - ra) % self.n_az).collect()
        };
        let e_lo = e0.saturating_sub(re);
        let e_hi = (e0 + re).min(self.n_el - 1);
        let mut hits = Vec::new();
        for e in e_lo..=e_hi {
            for &a in &az_buckets {
                for &i in &self.buckets[e * self.n_az + a] {
                    if within(&self.points[i as usize], theta, phi, d_az, d_el) {
                        hits.push(i as usize);
                    }
                }
            }
        }
        hits.sort_unstable();
        hits
    }
}

/// Mean range of the neighborhood, clamped to the neighbors' range span.
pub fn estimate_range<'a, I>(neighbors: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a SphericalPoint>,
{
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for p in neighbors {
        sum += p.r;
        n += 1;
        lo = lo.min(p.r);
        hi = hi.max(p.r);
    }
    if n == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    Ok((sum / n as f64).clamp(lo, hi))
}

/// Radial velocity of a reflection at `px`: the relative velocity
/// `v_object - v_radar` projected on the unit ray direction. Positive values
/// mean the target recedes.
pub fn doppler_velocity(px: &PixelCoord, v_object: &Vec3, v_radar: &Vec3, k: &CameraIntrinsics, radar_from_camera: &Mat3) -> f64 {
    let d = back_project_ray(k, radar_from_camera, px);
    (v_object - v_radar).dot(&d) / d.norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    OutsideFov,
    NoLidarSupport,
    BeyondMaxRange,
}

/// Per-frame bookkeeping of what happened to each requested signal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub frame_id: String,
    pub requested: usize,
    pub emitted: usize,
    pub dropped_outside_fov: usize,
    pub dropped_no_lidar_support: usize,
    pub dropped_beyond_max_range: usize,
    /// Signals whose neighborhood had to be widened at least once.
    pub widened: usize,
    /// Lidar points discarded for sitting at the radar origin.
    pub degenerate_lidar_points: usize,
    /// Indices of emitted signals replaced by uniform noise, if any.
    #[serde(default)]
    pub noise_replaced: Vec<usize>,
}

impl SynthesisReport {
    pub fn dropped(&self, cause: DropCause) -> usize {
        match cause {
            DropCause::OutsideFov => self.dropped_outside_fov,
            DropCause::NoLidarSupport => self.dropped_no_lidar_support,
            DropCause::BeyondMaxRange => self.dropped_beyond_max_range,
        }
    }

    fn record_drop(&mut self, cause: DropCause) {
        match cause {
            DropCause::OutsideFov => self.dropped_outside_fov += 1,
            DropCause::NoLidarSupport => self.dropped_no_lidar_support += 1,
            DropCause::BeyondMaxRange => self.dropped_beyond_max_range += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Add a uniform sub-pixel offset to every sampled pixel.
    pub jitter: bool,
    /// How many times the neighborhood thresholds may be doubled before a
    /// signal without lidar support is dropped.
    pub max_widenings: u32,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            jitter: false,
            max_widenings: 3,
        }
    }
}

/// Per-frame geometry shared by every signal of a synthesis run.
pub struct FrameGeometry {
    pub spherical: Vec<SphericalPoint>,
    pub degenerate: usize,
    /// Elevation span of the lidar cloud, if non-empty.
    pub lidar_elevation: Option<(f64, f64)>,
}

impl FrameGeometry {
    pub fn new(frame: &FrameBundle) -> Self {
        let (spherical, degenerate) = lidar_to_radar_spherical(&frame.lidar, &frame.calibration.lidar_to_radar);
        let lidar_elevation = spherical.iter().fold(None, |acc: Option<(f64, f64)>, p| match acc {
            None => Some((p.phi, p.phi)),
            Some((lo, hi)) => Some((lo.min(p.phi), hi.max(p.phi))),
        });
        Self {
            spherical,
            degenerate,
            lidar_elevation,
        }
    }
}

/// Generates the 4D signals (without signal strength) for one frame.
pub fn synthesize_frame(
    frame: &FrameBundle,
    prediction: &DistributionPrediction,
    spec: &RadarSpec,
    rng: &mut SeededRng,
    options: &SynthOptions,
) -> Result<(RadarDatagram, SynthesisReport)> {
    spec.validate().map_err(Error::OutOfRange)?;
    let mut report = SynthesisReport {
        frame_id: frame.id.clone(),
        requested: prediction.count,
        ..Default::default()
    };
    let mut datagram = RadarDatagram::new(frame.id.clone(), Vec::new());
    if prediction.count == 0 {
        return Ok((datagram, report));
    }
    let geometry = FrameGeometry::new(frame);
    report.degenerate_lidar_points = geometry.degenerate;
    let index = AngularIndex::new(&geometry.spherical, spec.delta_azimuth.min(spec.delta_elevation));

    let k = &frame.calibration.intrinsics;
    let rot = frame.calibration.radar_from_camera_rotation();
    let grid = &prediction.grid;
    let (sx, sy) = (frame.width() as f64 / grid.width() as f64, frame.height() as f64 / grid.height() as f64);
    let samples = sample_signals(grid, prediction.count, rng, options.jitter)?;

    for sample in samples {
        // grid cell centers map onto the image's pixel footprint
        let px = PixelCoord::new((sample.u + 0.5) * sx - 0.5, (sample.v + 0.5) * sy - 0.5);
        let (theta, phi) = pixel_to_angles(&px, k, rot);
        let lidar_covers = geometry
            .lidar_elevation
            .is_some_and(|(lo, hi)| phi >= lo - spec.delta_elevation && phi <= hi + spec.delta_elevation);
        if !spec.contains_angles(theta, phi) || !lidar_covers {
            report.record_drop(DropCause::OutsideFov);
            continue;
        }
        let mut scale = 1.0;
        let mut hits = Vec::new();
        for attempt in 0..=options.max_widenings {
            hits = index.query(theta, phi, spec.delta_azimuth * scale, spec.delta_elevation * scale);
            if !hits.is_empty() {
                if attempt > 0 {
                    report.widened += 1;
                }
                break;
            }
            scale *= 2.0;
        }
        if hits.is_empty() {
            report.record_drop(DropCause::NoLidarSupport);
            continue;
        }
        let r = estimate_range(hits.iter().map(|&i| &geometry.spherical[i]))?;
        if r > spec.max_range {
            report.record_drop(DropCause::BeyondMaxRange);
            continue;
        }
        let v_obj = frame.objects.velocity_at(&px);
        let v = doppler_velocity(&px, &v_obj, &frame.ego.velocity, k, rot);
        datagram.signals.push(RadarSignal { r, theta, phi, v, rss: None });
    }
    report.emitted = datagram.signals.len();
    Ok((datagram, report))
}

/// Number of signals `apply_noise` replaces out of `n`.
pub fn noise_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Replaces `⌈fraction · n⌉` randomly chosen signals with clutter drawn
/// uniformly over the radar's field-of-view volume out to `max_range`.
/// Clutter is static, so its Doppler is `-v_D · d̂`. The replaced indices are
/// recorded in the report in ascending order.
pub fn apply_noise(
    datagram: &mut RadarDatagram,
    report: &mut SynthesisReport,
    fraction: f64,
    spec: &RadarSpec,
    ego: &EgoState,
    rng: &mut SeededRng,
) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let n = datagram.signals.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut chosen = order[..noise_count(fraction, n)].to_vec();
    chosen.sort_unstable();
    let (a0, a1) = spec.azimuth_fov;
    let (s0, s1) = (spec.elevation_fov.0.sin(), spec.elevation_fov.1.sin());
    for &i in &chosen {
        let r = spec.max_range * rng.next_f64().cbrt();
        let theta = rng.uniform(a0, a1);
        let phi = rng.uniform(s0, s1).asin();
        let dir = spherical_to_cartesian(&SphericalPoint::new(1.0, theta, phi));
        datagram.signals[i] = RadarSignal {
            r,
            theta,
            phi,
            v: -ego.velocity.dot(&dir),
            rss: None,
        };
    }
    report.noise_replaced = chosen;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;


    fn aligned() -> (CameraIntrinsics, Mat3) {
        let k = CameraIntrinsics::new(100.0, 100.0, 80.0, 60.0).unwrap();
        let radar_from_cam = RigidTransform::camera_from_radar_aligned(Vec3::zeros()).inverse();
        (k, *radar_from_cam.rotation())
    }

    #[test]
    fn angles_of_principal_point() {
        let (k, r) = aligned();
        assert_eq!(pixel_to_angles(&PixelCoord::new(80.0, 60.0), &k, &r), (0.0, 0.0));
        // one focal length to the right: ray (1, -1, 0) in radar frame
        let (t, p) = pixel_to_angles(&PixelCoord::new(180.0, 60.0), &k, &r);
        assert!((t + PI / 4.0).abs() < 1e-12 && p == 0.0);
    }

    #[test]
    fn angles_match_projected_point() {
        let (k, r) = aligned();
        let cam = RigidTransform::camera_from_radar_aligned(Vec3::zeros());
        let s = SphericalPoint::new(12.0, 0.2, -0.1);
        let px = crate::geometry::project_to_image(&k, &cam, &spherical_to_cartesian(&s)).unwrap();
        let (t, p) = pixel_to_angles(&px, &k, &r);
        assert!((t - s.theta).abs() < 1e-9 && (p - s.phi).abs() < 1e-9);
    }

    #[test]
    fn lidar_conversion_cases() {
        let (s, d) = lidar_to_radar_spherical(&[Vec3::new(1.0, 0.0, 0.0)], &RigidTransform::identity());
        assert_eq!((s[0].r, s[0].theta, s[0].phi, d), (1.0, 0.0, 0.0, 0));
        let t = RigidTransform::from_translation(Vec3::new(-1.0, 0.0, 0.0));
        let (s, _) = lidar_to_radar_spherical(&[Vec3::new(2.0, 0.0, 0.0)], &t);
        assert_eq!((s[0].r, s[0].theta, s[0].phi), (1.0, 0.0, 0.0));
        let (s, d) = lidar_to_radar_spherical(&[Vec3::new(1.0, 0.0, 0.0)], &t);
        assert!(s.is_empty() && d == 1);
    }

    #[test]
    fn neighborhood_thresholds() {
        let spec = RadarSpec::default();
        let lone = [SphericalPoint::new(5.0, 0.3, 0.1)];
        assert_eq!(neighbor_query(&lone, 0.3, 0.1, &spec).len(), 1);
        let far = [SphericalPoint::new(5.0, 0.3 + 2.0 * spec.delta_azimuth, 0.1)];
        assert!(neighbor_query(&far, 0.3, 0.1, &spec).is_empty());
        let d = spec.delta_azimuth;
        let wrapped = [SphericalPoint::new(5.0, -PI + d / 4.0, 0.0)];
        assert_eq!(neighbor_query(&wrapped, PI - d / 4.0, 0.0, &spec).len(), 1);
    }

    #[test]
    fn index_matches_scan_across_seam() {
        let pts: Vec<SphericalPoint> = (0..400)
            .map(|i| {
                let t = wrap_angle(PI - 0.05 + i as f64 * 0.00025);
                SphericalPoint::new(1.0 + i as f64, t, (i as f64 * 0.37).sin() * 0.05)
            })
            .collect();
        let index = AngularIndex::new(&pts, 0.01);
        for q in [PI, -PI + 1e-6, PI - 0.03, 0.0] {
            assert_eq!(index.query(q, 0.0, 0.02, 0.03), neighbor_query_with(&pts, q, 0.0, 0.02, 0.03));
        }
    }

    #[test]
    fn range_estimates() {
        let p = |r| SphericalPoint::new(r, 0.0, 0.0);
        assert_eq!(estimate_range(&[p(10.0)]).unwrap(), 10.0);
        assert_eq!(estimate_range(&[p(10.0), p(12.0), p(14.0)]).unwrap(), 12.0);
        assert_eq!(estimate_range(&[p(5.0), p(45.0)]).unwrap(), 25.0);
        assert_eq!(estimate_range(&[p(0.1), p(0.1), p(0.1)]).unwrap(), 0.1);
        assert!(matches!(estimate_range(&[]), Err(Error::EmptyNeighborhood)));
    }

    #[test]
    fn doppler_cases() {
        let (k, r) = aligned();
        let ahead = PixelCoord::new(80.0, 60.0);
        let zero = Vec3::zeros();
        assert_eq!(doppler_velocity(&ahead, &zero, &Vec3::new(10.0, 0.0, 0.0), &k, &r), -10.0);
        let v = Vec3::new(3.0, -1.0, 0.5);
        assert_eq!(doppler_velocity(&PixelCoord::new(12.0, 99.0), &v, &v, &k, &r), 0.0);
        assert_eq!(doppler_velocity(&ahead, &Vec3::new(5.0, 0.0, 0.0), &zero, &k, &r), 5.0);
    }

    #[test]
    fn velocity_map_lookup() {
        let map = ObjectVelocityMap::new(vec![ObjectRegion {
            u_min: 10.0,
            v_min: 10.0,
            u_max: 20.0,
            v_max: 20.0,
            velocity: Vec3::new(1.0, 2.0, 3.0),
        }]);
        assert_eq!(map.velocity_at(&PixelCoord::new(15.0, 10.0)), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(map.velocity_at(&PixelCoord::new(25.0, 10.0)), Vec3::zeros());
    }

    #[test]
    fn presets_validate() {
        for s in [RadarSpec::vod(), RadarSpec::astyx(), RadarSpec::msc()] {
            s.validate().unwrap();
        }
        assert!((RadarSpec::msc().delta_azimuth - 1f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn noise_replaces_ceiling_fraction() {
        assert_eq!(noise_count(0.05, 100), 5);
        assert_eq!(noise_count(0.05, 101), 6);
        assert_eq!(noise_count(0.0, 100), 0);
        let signals = (0..100)
            .map(|i| RadarSignal {
                r: 1.0 + i as f64,
                theta: 0.0,
                phi: 0.0,
                v: 0.0,
                rss: None,
            })
            .collect();
        let mut d = RadarDatagram::new("f", signals);
        let original = d.clone();
        let mut report = SynthesisReport::default();
        let spec = RadarSpec::vod();
        let ego = EgoState::new(Vec3::new(5.0, 0.0, 0.0));
        apply_noise(&mut d, &mut report, 0.05, &spec, &ego, &mut SeededRng::new(1, 0)).unwrap();
        assert_eq!(report.noise_replaced.len(), 5);
        let changed: Vec<usize> = (0..100).filter(|&i| d.signals[i] != original.signals[i]).collect();
        assert_eq!(changed, report.noise_replaced);
        for &i in &changed {
            let s = &d.signals[i];
            assert!(s.r <= spec.max_range && spec.contains_angles(s.theta, s.phi));
            assert!(s.v.abs() <= 5.0 + 1e-12);
        }
    }
}
