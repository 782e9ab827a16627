//! Synthetic scenes with analytic geometry.
//!
//! Every scene is a handful of planes and axis-aligned boxes seen by a
//! camera collocated with the radar. Lidar returns are exact ray casts, the
//! image is flat-shaded, and ground-truth radar signals sit on the surfaces
//! with a signal strength that is a linear function of range per material.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    encode_lidar_bin, format_calibration, format_objects_csv, write_datagram_csv, Calibration, FrameBundle, FrameDescriptor, Manifest,
    RadarDatagram, RadarSignal, SigmaSetting,
};
use crate::error::{Error, Result};
use crate::geometry::{cartesian_to_spherical, project_to_image, CameraIntrinsics, Mat3, PixelCoord, RigidTransform, Vec3};
use crate::image::RgbImage;
use crate::sampler::SeededRng;
use crate::synth::{EgoState, ObjectRegion, ObjectVelocityMap, RadarSpec};

pub const IMAGE_WIDTH: usize = 160;
pub const IMAGE_HEIGHT: usize = 120;
pub const FOCAL: f64 = 100.0;

/// Lidar channels span this elevation, degrees.
pub const LIDAR_ELEVATION_DEG: (f64, f64) = (-15.0, 15.0);
pub const LIDAR_CHANNELS: usize = 32;
pub const LIDAR_AZIMUTH_DEG: (f64, f64) = (-60.0, 60.0);
pub const LIDAR_AZIMUTH_STEP_DEG: f64 = 0.25;

/// Ground-truth signals keep this far from the lidar's vertical limits, degrees.
const GT_ELEVATION_MARGIN_DEG: f64 = 5.0;
/// Ground-truth signals keep this far from the image border, pixels.
const GT_PIXEL_MARGIN: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Asphalt,
    Concrete,
    Metal,
}

impl Material {
    pub const ALL: [Material; 3] = [Material::Asphalt, Material::Concrete, Material::Metal];

    /// `(intercept, slope)` of the strength law `a = intercept + slope * r`.
    pub fn rss_law(self) -> (f64, f64) {
        match self {
            Material::Asphalt => (5.0, -0.2),
            Material::Concrete => (15.0, -0.3),
            Material::Metal => (30.0, -0.5),
        }
    }

    pub fn rss_at(self, range: f64) -> f64 {
        let (a, b) = self.rss_law();
        a + b * range
    }

    /// Probability that a ray hitting this material yields a radar signal.
    pub fn reflectivity(self) -> f64 {
        match self {
            Material::Asphalt => 0.1,
            Material::Concrete => 0.4,
            Material::Metal => 1.0,
        }
    }

    fn color(self) -> [f64; 3] {
        match self {
            Material::Asphalt => [70.0, 70.0, 78.0],
            Material::Concrete => [175.0, 168.0, 150.0],
            Material::Metal => [40.0, 95.0, 205.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Surface {
    /// Points with `normal · p = offset`.
    Plane { normal: Vec3, offset: f64 },
    AxisBox { min: Vec3, max: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub surface: Surface,
    pub material: Material,
    /// Velocity in the radar frame, m/s.
    pub velocity: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub primitive: usize,
}

const MIN_T: f64 = 1e-6;

impl Surface {
    /// Distance along the unit ray `origin + t dir` to the first hit.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
        match *self {
            Surface::Plane { normal, offset } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (offset - normal.dot(origin)) / denom;
                (t > MIN_T).then_some((t, normal))
            }
            Surface::AxisBox { min, max } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                let mut axis = 0;
                for a in 0..3 {
                    if dir[a].abs() < 1e-15 {
                        if origin[a] < min[a] || origin[a] > max[a] {
                            return None;
                        }
                        continue;
                    }
                    let (mut near, mut far) = ((min[a] - origin[a]) / dir[a], (max[a] - origin[a]) / dir[a]);
                    if near > far {
                        std::mem::swap(&mut near, &mut far);
                    }
                    if near > t0 {
                        t0 = near;
                        axis = a;
                    }
                    t1 = t1.min(far);
                }
                if t0 > t1 || t0 <= MIN_T {
                    return None;
                }
                let mut n = Vec3::zeros();
                n[axis] = -dir[axis].signum();
                Some((t0, n))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// A single concrete wall 10 m ahead, static world.
    Wall,
    /// Metal boxes on asphalt in front of a concrete wall.
    Boxes,
    /// Asphalt road between two building fronts with moving cars.
    Street,
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wall" => Ok(SceneKind::Wall),
            "boxes" => Ok(SceneKind::Boxes),
            "street" => Ok(SceneKind::Street),
            _ => Err(format!("unknown scene {s:?} (expected wall, boxes or street)")),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Wall => "wall",
            SceneKind::Boxes => "boxes",
            SceneKind::Street => "street",
        })
    }
}

/// Distance of the wall in [`SceneKind::Wall`].
pub const WALL_DISTANCE: f64 = 10.0;
const GROUND_Z: f64 = -1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub ego_velocity: Vec3,
    /// Primitives annotated as objects in the image.
    pub objects: Vec<usize>,
    pub lidar_to_radar: RigidTransform,
}

impl Scene {
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        self.primitives
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.surface.intersect(origin, dir).map(|(t, n)| (i, t, n)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(primitive, t, normal)| Hit {
                t,
                point: origin + dir * t,
                normal,
                primitive,
            })
    }

    pub fn build(kind: SceneKind, rng: &mut SeededRng, frame_index: usize) -> Self {
        let plane = |normal: Vec3, offset: f64, material| Primitive {
            surface: Surface::Plane { normal, offset },
            material,
            velocity: Vec3::zeros(),
        };
        let ground = plane(Vec3::z(), GROUND_Z, Material::Asphalt);
        let lidar_mount = RigidTransform::new(*RigidTransform::rotation_z(0.02).rotation(), Vec3::new(0.1, 0.0, 0.3))
            .expect("rotation about z is rigid");
        match kind {
            SceneKind::Wall => Self {
                primitives: vec![plane(Vec3::x(), WALL_DISTANCE, Material::Concrete)],
                ego_velocity: Vec3::new(10.0, 0.0, 0.0),
                objects: Vec::new(),
                lidar_to_radar: RigidTransform::identity(),
            },
            SceneKind::Boxes => {
                let mut primitives = vec![ground, plane(Vec3::x(), 30.0, Material::Concrete)];
                let mut objects = Vec::new();
                let n_boxes = 3 + rng.below(3) as usize;
                for _ in 0..n_boxes {
                    let x = rng.uniform(7.0, 24.0);
                    let y = rng.uniform(-6.0, 6.0);
                    let (dx, dy, h) = (rng.uniform(0.8, 2.0), rng.uniform(0.8, 2.5), rng.uniform(0.8, 2.2));
                    let moving = rng.next_f64() < 0.5;
                    let velocity = if moving {
                        Vec3::new(rng.uniform(-3.0, 3.0), rng.uniform(-2.0, 2.0), 0.0)
                    } else {
                        Vec3::zeros()
                    };
                    objects.push(primitives.len());
                    primitives.push(Primitive {
                        surface: Surface::AxisBox {
                            min: Vec3::new(x, y - dy / 2.0, GROUND_Z),
                            max: Vec3::new(x + dx, y + dy / 2.0, GROUND_Z + h),
                        },
                        material: Material::Metal,
                        velocity,
                    });
                }
                Self {
                    primitives,
                    ego_velocity: Vec3::new(2.0 + 2.0 * frame_index as f64, 0.0, 0.0),
                    objects,
                    lidar_to_radar: lidar_mount,
                }
            }
            SceneKind::Street => {
                let mut primitives = vec![
                    ground,
                    plane(Vec3::y(), 8.0, Material::Concrete),
                    plane(-Vec3::y(), 8.0, Material::Concrete),
                    plane(Vec3::x(), 35.0, Material::Concrete),
                ];
                let mut objects = Vec::new();
                let n_cars = 2 + rng.below(3) as usize;
                for i in 0..n_cars {
                    let lane = if i % 2 == 0 { -2.0 } else { 2.0 };
                    let x = rng.uniform(6.0, 28.0);
                    let speed = rng.uniform(3.0, 12.0) * if lane < 0.0 { 1.0 } else { -1.0 };
                    objects.push(primitives.len());
                    primitives.push(Primitive {
                        surface: Surface::AxisBox {
                            min: Vec3::new(x, lane - 0.9, GROUND_Z),
                            max: Vec3::new(x + 4.2, lane + 0.9, GROUND_Z + 1.5),
                        },
                        material: Material::Metal,
                        velocity: Vec3::new(speed, 0.0, 0.0),
                    });
                }
                Self {
                    primitives,
                    ego_velocity: Vec3::new(4.0 + 1.5 * frame_index as f64, 0.0, 0.0),
                    objects,
                    lidar_to_radar: lidar_mount,
                }
            }
        }
    }

    /// Ray-cast lidar sweep, in the lidar frame.
    pub fn lidar_scan(&self) -> Vec<Vec3> {
        let t = &self.lidar_to_radar;
        let inv = t.inverse();
        let origin = *t.translation();
        let (e0, e1) = LIDAR_ELEVATION_DEG;
        let (a0, a1) = LIDAR_AZIMUTH_DEG;
        let n_az = ((a1 - a0) / LIDAR_AZIMUTH_STEP_DEG).round() as usize + 1;
        let mut points = Vec::with_capacity(LIDAR_CHANNELS * n_az);
        for c in 0..LIDAR_CHANNELS {
            let el = (e0 + (e1 - e0) * c as f64 / (LIDAR_CHANNELS - 1) as f64).to_radians();
            for k in 0..n_az {
                let az = (a0 + LIDAR_AZIMUTH_STEP_DEG * k as f64).to_radians();
                let dir_l = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let dir = t.transform_vector(&dir_l);
                if let Some(hit) = self.cast(&origin, &dir) {
                    points.push(inv.transform_point(&hit.point));
                }
            }
        }
        points
    }

    pub fn render(&self, k: &CameraIntrinsics, radar_from_camera: &Mat3) -> RgbImage {
        let light = Vec3::new(-0.5, 0.3, 0.8).normalize();
        let mut img = RgbImage::new(IMAGE_WIDTH, IMAGE_HEIGHT);
        for v in 0..IMAGE_HEIGHT {
            for u in 0..IMAGE_WIDTH {
                let dir = (radar_from_camera * k.unproject(&PixelCoord::new(u as f64, v as f64))).normalize();
                let rgb = match self.cast(&Vec3::zeros(), &dir) {
                    Some(hit) => {
                        let shade = 0.35 + 0.65 * hit.normal.dot(&light).abs();
                        self.primitives[hit.primitive].material.color().map(|c| (c * shade).round().min(255.0) as u8)
                    }
                    None => [135, 190, 235],
                };
                img.set_pixel(u, v, rgb);
            }
        }
        img
    }

    /// Image-space bounding boxes of the annotated objects.
    pub fn object_regions(&self, k: &CameraIntrinsics, camera_from_radar: &RigidTransform) -> ObjectVelocityMap {
        let mut regions = Vec::new();
        for &i in &self.objects {
            let p = &self.primitives[i];
            let Surface::AxisBox { min, max } = p.surface else { continue };
            let corners: Vec<PixelCoord> = (0..8)
                .filter_map(|c| {
                    let q = Vec3::new(
                        if c & 1 == 0 { min.x } else { max.x },
                        if c & 2 == 0 { min.y } else { max.y },
                        if c & 4 == 0 { min.z } else { max.z },
                    );
                    project_to_image(k, camera_from_radar, &q).ok()
                })
                .collect();
            if corners.len() < 8 {
                continue;
            }
            let clamp_u = |x: f64| x.clamp(-0.5, IMAGE_WIDTH as f64 - 0.5);
            let clamp_v = |x: f64| x.clamp(-0.5, IMAGE_HEIGHT as f64 - 0.5);
            let u_min = clamp_u(corners.iter().map(|c| c.u).fold(f64::INFINITY, f64::min));
            let u_max = clamp_u(corners.iter().map(|c| c.u).fold(f64::NEG_INFINITY, f64::max));
            let v_min = clamp_v(corners.iter().map(|c| c.v).fold(f64::INFINITY, f64::min));
            let v_max = clamp_v(corners.iter().map(|c| c.v).fold(f64::NEG_INFINITY, f64::max));
            if u_min < u_max && v_min < v_max {
                regions.push(ObjectRegion {
                    u_min,
                    v_min,
                    u_max,
                    v_max,
                    velocity: p.velocity,
                });
            }
        }
        ObjectVelocityMap::new(regions)
    }

    /// Surface-bound radar signals with material strength laws. Directions
    /// are drawn uniformly over the image and kept with the probability of
    /// the material they hit.
    pub fn ground_truth(&self, n: usize, k: &CameraIntrinsics, radar_from_camera: &Mat3, rng: &mut SeededRng) -> Vec<(RadarSignal, Material)> {
        let el_lo = (LIDAR_ELEVATION_DEG.0 + GT_ELEVATION_MARGIN_DEG).to_radians();
        let el_hi = (LIDAR_ELEVATION_DEG.1 - GT_ELEVATION_MARGIN_DEG).to_radians();
        let m = GT_PIXEL_MARGIN;
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n && attempts < 1000 * n.max(1) {
            attempts += 1;
            let px = PixelCoord::new(
                rng.uniform(m, IMAGE_WIDTH as f64 - 1.0 - m),
                rng.uniform(m, IMAGE_HEIGHT as f64 - 1.0 - m),
            );
            let dir = (radar_from_camera * k.unproject(&px)).normalize();
            let Some(hit) = self.cast(&Vec3::zeros(), &dir) else { continue };
            let prim = &self.primitives[hit.primitive];
            if rng.next_f64() >= prim.material.reflectivity() {
                continue;
            }
            let s = cartesian_to_spherical(&hit.point).expect("hit lies away from the origin");
            if s.phi < el_lo || s.phi > el_hi {
                continue;
            }
            let v = (prim.velocity - self.ego_velocity).dot(&dir);
            out.push((
                RadarSignal {
                    r: s.r,
                    theta: s.theta,
                    phi: s.phi,
                    v,
                    rss: Some(prim.material.rss_at(s.r)),
                },
                prim.material,
            ));
        }
        out
    }
}

pub fn fixture_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(FOCAL, FOCAL, (IMAGE_WIDTH / 2) as f64, (IMAGE_HEIGHT / 2) as f64)
        .expect("fixture intrinsics are valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureOptions {
    pub scene: SceneKind,
    pub frames: usize,
    pub seed: u64,
    /// Ground-truth signals per frame; scene default when `None`.
    pub signals: Option<usize>,
}

impl FixtureOptions {
    pub fn new(scene: SceneKind, frames: usize, seed: u64) -> Self {
        Self {
            scene,
            frames,
            seed,
            signals: None,
        }
    }
}

/// One generated frame plus the material behind every ground-truth signal.
#[derive(Clone, Debug)]
pub struct FixtureFrame {
    pub bundle: FrameBundle,
    pub scene: Scene,
    pub materials: Vec<Material>,
}

pub fn frame_id(scene: SceneKind, index: usize) -> String {
    format!("{scene}_{index:04}")
}

pub fn generate_frame(opts: &FixtureOptions, index: usize) -> FixtureFrame {
    let mut rng = SeededRng::for_frame(opts.seed, index as u64);
    let scene = Scene::build(opts.scene, &mut rng, index);
    let k = fixture_intrinsics();
    let camera_to_radar = RigidTransform::camera_from_radar_aligned(Vec3::zeros()).inverse();
    let calibration = Calibration::new(k, scene.lidar_to_radar, camera_to_radar);
    let rot = *camera_to_radar.rotation();
    let image = scene.render(&k, &rot);
    let lidar = scene.lidar_scan();
    let n = opts.signals.unwrap_or_else(|| match opts.scene {
        SceneKind::Wall => 150,
        _ => (120.0 + 8.0 * scene.ego_velocity.norm()).round() as usize,
    });
    let gt = scene.ground_truth(n, &k, &rot, &mut rng);
    let objects = scene.object_regions(&k, &calibration.radar_to_camera);
    let id = frame_id(opts.scene, index);
    let (signals, materials) = gt.into_iter().unzip();
    FixtureFrame {
        bundle: FrameBundle {
            id: id.clone(),
            image,
            lidar,
            ego: EgoState::new(scene.ego_velocity),
            calibration,
            ground_truth: Some(RadarDatagram::new(id, signals)),
            objects,
        },
        scene,
        materials,
    }
}

pub fn generate(opts: &FixtureOptions) -> Vec<FixtureFrame> {
    (0..opts.frames).map(|i| generate_frame(opts, i)).collect()
}

/// Writes a generated dataset under `out_dir` and returns the manifest path.
pub fn write_fixture(out_dir: &Path, opts: &FixtureOptions) -> Result<PathBuf> {
    for sub in ["images", "lidar", "calib", "radar", "objects"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let write = |path: PathBuf, bytes: &[u8]| std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e));
    let mut frames = Vec::new();
    let mut n_max = 1;
    for i in 0..opts.frames {
        let f = generate_frame(opts, i);
        let b = &f.bundle;
        let gt = b.ground_truth.as_ref().expect("fixture frames carry ground truth");
        n_max = n_max.max(gt.len());
        let desc = FrameDescriptor {
            id: b.id.clone(),
            image: out_dir.join("images").join(format!("{}.ppm", b.id)),
            lidar: out_dir.join("lidar").join(format!("{}.bin", b.id)),
            calib: out_dir.join("calib").join(format!("{}.txt", b.id)),
            ego_velocity: b.ego.velocity,
            radar: Some(out_dir.join("radar").join(format!("{}.csv", b.id))),
            objects: (!b.objects.regions().is_empty()).then(|| out_dir.join("objects").join(format!("{}.csv", b.id))),
        };
        write(desc.image.clone(), &b.image.to_ppm())?;
        write(desc.lidar.clone(), &encode_lidar_bin(&b.lidar, &[]))?;
        write(desc.calib.clone(), format_calibration(&b.calibration).as_bytes())?;
        write_datagram_csv(desc.radar.as_deref().expect("set above"), gt)?;
        if let Some(p) = &desc.objects {
            write(p.clone(), format_objects_csv(&b.objects).as_bytes())?;
        }
        frames.push(desc);
    }
    let manifest = Manifest {
        base_dir: out_dir.to_path_buf(),
        dataset: Some(format!("fixture-{}", opts.scene)),
        radar: RadarSpec { n_max, ..RadarSpec::default() },
        sigma: Some(SigmaSetting::Auto),
        seed: Some(opts.seed),
        frames,
    };
    let path = out_dir.join("manifest.txt");
    write(path.clone(), manifest.to_text().as_bytes())?;
    Ok(path)
}
