//! Per-signal input features for signal-strength regression: an RGB patch
//! around the signal's pixel and a small range image of the lidar points
//! around its 3D position.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::image::{GrayImage, RgbImage};

/// `2r x 2r` RGB crop; pixels outside the source image are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImagePatch {
    radius: usize,
    anchor: (usize, usize),
    data: Vec<u8>,
}

impl ImagePatch {
    pub fn side(&self) -> usize {
        2 * self.radius
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    /// Interleaved RGB, row-major.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.side() + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn to_image(&self) -> RgbImage {
        RgbImage {
            width: self.side(),
            height: self.side(),
            data: self.data.clone(),
        }
    }
}

/// Crops the pixels with `u` in `(u_i - r_c, u_i + r_c]` and likewise in `v`.
pub fn extract_patch(image: &RgbImage, u_i: usize, v_i: usize, r_c: usize) -> Result<ImagePatch> {
    if u_i >= image.width || v_i >= image.height {
        return Err(Error::AnchorOutOfImage {
            u: u_i as f64,
            v: v_i as f64,
            width: image.width,
            height: image.height,
        });
    }
    let side = 2 * r_c;
    let mut data = vec![0u8; side * side * 3];
    // patch column x covers source column u_i - r_c + 1 + x
    let first_u = u_i as i64 - r_c as i64 + 1;
    let first_v = v_i as i64 - r_c as i64 + 1;
    let x_lo = (-first_u).max(0) as usize;
    let x_hi = ((image.width as i64 - first_u).min(side as i64)).max(0) as usize;
    for y in 0..side {
        let v = first_v + y as i64;
        if v < 0 || v >= image.height as i64 || x_lo >= x_hi {
            continue;
        }
        let src_start = 3 * (v as usize * image.width + (first_u + x_lo as i64) as usize);
        let len = 3 * (x_hi - x_lo);
        let dst_start = 3 * (y * side + x_lo);
        data[dst_start..dst_start + len].copy_from_slice(&image.data[src_start..src_start + len]);
    }
    Ok(ImagePatch {
        radius: r_c,
        anchor: (u_i, v_i),
        data,
    })
}

/// Points within Euclidean distance `r_l` (inclusive) of `anchor`.
pub fn local_cloud(cloud: &[Vec3], anchor: &Vec3, r_l: f64) -> Vec<Vec3> {
    cloud.iter().filter(|l| (*l - anchor).norm() <= r_l).copied().collect()
}

/// Grayscale depth-offset raster of a local cloud, plus a mask of the cells
/// that received at least one point. Untouched cells hold 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub mask: Vec<bool>,
}

impl RangeImage {
    pub fn at(&self, u: usize, v: usize) -> u8 {
        self.pixels[v * self.width + u]
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.pixels.clone(),
        }
    }
}

/// Cell of `l` relative to anchor `p`, projected on the y-z plane and
/// clamped into the raster.
pub fn range_cell(l: &Vec3, p: &Vec3, r_l: f64, width: usize, height: usize) -> (usize, usize) {
    let u = (0.5 * (1.0 - (l.y - p.y) / r_l) * width as f64).floor();
    let v = ((1.0 - (l.z - p.z + r_l) / (2.0 * r_l)) * height as f64).floor();
    let clamp = |x: f64, n: usize| (x.max(0.0) as usize).min(n - 1);
    (clamp(u, width), clamp(v, height))
}

/// Gray level of `l`: 127 plus the distance to `p` in units of `2 r_l / 255`,
/// signed by whether `l` is farther from the sensor than `p`.
pub fn range_gray(l: &Vec3, p: &Vec3, r_l: f64) -> u8 {
    let step = (l - p).norm() / (2.0 * r_l) * 255.0;
    let g = if l.norm() >= p.norm() {
        127.0 + step.ceil()
    } else {
        127.0 - step.floor()
    };
    g.clamp(0.0, 255.0) as u8
}

pub fn build_range_image(local: &[Vec3], anchor: &Vec3, r_l: f64, width: usize, height: usize) -> RangeImage {
    assert!(width > 0 && height > 0, "range image needs a positive size");
    let mut sum = vec![0u64; width * height];
    let mut count = vec![0u64; width * height];
    for l in local {
        let (u, v) = range_cell(l, anchor, r_l, width, height);
        sum[v * width + u] += range_gray(l, anchor, r_l) as u64;
        count[v * width + u] += 1;
    }
    let pixels = sum
        .iter()
        .zip(&count)
        // integer mean rounded half-up
        .map(|(&s, &c)| if c == 0 { 0 } else { ((2 * s + c) / (2 * c)) as u8 })
        .collect();
    RangeImage {
        width,
        height,
        pixels,
        mask: count.iter().map(|&c| c > 0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient_image(w: usize, h: usize) -> RgbImage {
        let mut img = RgbImage::new(w, h);
        for v in 0..h {
            for u in 0..w {
                img.set_pixel(u, v, [(u % 256) as u8, (v % 256) as u8, ((u * 7 + v * 3) % 256) as u8]);
            }
        }
        img
    }

    #[test]
    fn interior_patch_is_a_crop() {
        let img = gradient_image(300, 200);
        let p = extract_patch(&img, 150, 100, 50).unwrap();
        assert_eq!(p.side(), 100);
        for y in 0..100 {
            for x in 0..100 {
                assert_eq!(p.pixel(x, y), img.pixel(101 + x, 51 + y));
            }
        }
    }

    #[test]
    fn corner_patch_zero_padded() {
        let img = gradient_image(120, 80);
        let p = extract_patch(&img, 0, 0, 50).unwrap();
        // only the bottom-right quadrant (plus the anchor row/column) is inside
        for y in 0..100 {
            for x in 0..100 {
                let inside = x >= 49 && y >= 49;
                if inside {
                    assert_eq!(p.pixel(x, y), img.pixel(x - 49, y - 49));
                } else {
                    assert_eq!(p.pixel(x, y), [0, 0, 0]);
                }
            }
        }
        assert!(matches!(extract_patch(&img, 120, 0, 5), Err(Error::AnchorOutOfImage { .. })));
    }

    #[test]
    fn shifted_anchors_overlap() {
        let img = gradient_image(64, 48);
        let a = extract_patch(&img, 30, 20, 8).unwrap();
        let b = extract_patch(&img, 31, 20, 8).unwrap();
        for y in 0..16 {
            for x in 0..15 {
                assert_eq!(a.pixel(x + 1, y), b.pixel(x, y));
            }
        }
    }

    #[test]
    fn local_cloud_boundary() {
        let anchor = Vec3::new(5.0, 0.0, 0.0);
        let cloud = [anchor, Vec3::new(6.0, 0.0, 0.0), Vec3::new(6.0, 0.1, 0.0)];
        assert_eq!(local_cloud(&cloud, &anchor, 1.0), vec![cloud[0], cloud[1]]);
    }

    #[test]
    fn hand_cases() {
        let p = Vec3::new(10.0, 2.0, 0.5);
        let img = build_range_image(&[p], &p, 1.0, 128, 32);
        assert_eq!(img.at(64, 16), 127);
        assert_eq!(img.pixels.iter().filter(|&&g| g != 0).count(), 1);
        let far = p + p.normalize();
        assert_eq!(range_gray(&far, &p, 1.0), 255);
        let near = p - p.normalize();
        assert_eq!(range_gray(&near, &p, 1.0), 0);
        let empty = build_range_image(&[], &p, 1.0, 128, 32);
        assert!(empty.pixels.iter().all(|&g| g == 0) && empty.mask.iter().all(|m| !m));
    }

    #[test]
    fn collisions_round_half_up() {
        let p = Vec3::new(10.0, 0.0, 0.0);
        // same cell, gray levels 127 and 128
        let a = p;
        let b = Vec3::new(10.0 + 1e-6, 0.0, 0.0);
        assert_eq!(range_gray(&b, &p, 1.0), 128);
        let img = build_range_image(&[a, b], &p, 1.0, 128, 32);
        assert_eq!(img.at(64, 16), 128);
    }

    fn cloud_strategy() -> impl Strategy<Value = (Vec3, Vec<Vec3>)> {
        let anchor = (1.0..30.0f64, -5.0..5.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z));
        let offsets = prop::collection::vec((-0.57..0.57f64, -0.57..0.57f64, -0.57..0.57f64), 0..60);
        (anchor, offsets).prop_map(|(a, offs)| (a, offs.into_iter().map(|(x, y, z)| a + Vec3::new(x, y, z)).collect()))
    }

    proptest! {
        #[test]
        fn gray_values_in_band((anchor, cloud) in cloud_strategy()) {
            let local = local_cloud(&cloud, &anchor, 1.0);
            for l in &local {
                // the unclamped level stays inside the byte range
                let step = (l - anchor).norm() / 2.0 * 255.0;
                prop_assert!(127.0 + step.ceil() <= 255.0 && 127.0 - step.floor() >= 0.0);
            }
        }

        #[test]
        fn permutation_invariant((anchor, cloud) in cloud_strategy(), seed in any::<u64>()) {
            let mut shuffled = cloud.clone();
            crate::sampler::SeededRng::new(seed, 0).shuffle(&mut shuffled);
            prop_assert_eq!(
                build_range_image(&cloud, &anchor, 1.0, 128, 32),
                build_range_image(&shuffled, &anchor, 1.0, 128, 32)
            );
        }

        #[test]
        fn cells_translate_with_anchor(
            anchor in (64..1920i32, -320..320i32, -128..128i32),
            offs in prop::collection::vec((-290..290i32, -290..290i32, -290..290i32), 1..40),
            dy in -3..3i32,
            dz in -3..3i32,
        ) {
            // dyadic coordinates keep every difference exact
            let a = Vec3::new(anchor.0 as f64 / 64.0, anchor.1 as f64 / 64.0, anchor.2 as f64 / 64.0);
            let shift = Vec3::new(0.0, dy as f64, dz as f64);
            for (x, y, z) in offs {
                let l = a + Vec3::new(x as f64 / 512.0, y as f64 / 512.0, z as f64 / 512.0);
                prop_assert_eq!(
                    range_cell(&l, &a, 1.0, 128, 32),
                    range_cell(&(l + shift), &(a + shift), 1.0, 128, 32)
                );
            }
        }
    }
}
