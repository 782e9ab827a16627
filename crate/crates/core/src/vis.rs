//! Figures: distribution heatmaps, point overlays and range images.

use std::fmt::Write as _;

use base64::Engine as _;

use crate::dataset::{FrameBundle, RadarDatagram};
use crate::distribution::{export_grayscale, project_datagram, ExportMode, ProbabilityGrid};
use crate::encoders::{build_range_image, local_cloud};
use crate::error::{Error, Result};
use crate::geometry::{spherical_to_cartesian, PixelCoord};
use crate::image::{GrayImage, RgbImage};
use crate::sampler::SeededRng;

pub const REAL_COLOR: &str = "red";
pub const SYNTH_COLOR: &str = "blue";

/// Grid as an 8-bit heatmap with the most likely cell at 255.
pub fn distribution_heatmap(grid: &ProbabilityGrid) -> GrayImage {
    export_grayscale(grid, ExportMode::MaxNorm).to_gray8().expect("8-bit export")
}

/// Keeps each item with probability `fraction`, in order.
pub fn subsample<T: Clone>(items: &[T], fraction: f64, rng: &mut SeededRng) -> Vec<T> {
    if fraction >= 1.0 {
        return items.to_vec();
    }
    items.iter().filter(|_| rng.next_f64() < fraction).cloned().collect()
}

/// Image-plane positions of a datagram's signals that land in the frame.
pub fn datagram_pixels(frame: &FrameBundle, d: &RadarDatagram) -> Vec<PixelCoord> {
    let c = &frame.calibration;
    project_datagram(d, &c.intrinsics, &c.radar_to_camera, frame.width(), frame.height()).pixels
}

/// SVG with the camera image beneath one circle per projected point.
pub fn overlay_svg(image: &RgbImage, real: &[PixelCoord], synthesized: &[PixelCoord]) -> String {
    let (w, h) = (image.width, image.height);
    let b64 = base64::engine::general_purpose::STANDARD.encode(image.to_bmp());
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <image x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" href=\"data:image/bmp;base64,{b64}\"/>\n"
    );
    let radius = (w.max(h) as f64 / 200.0).max(1.0);
    for (points, color, class) in [(real, REAL_COLOR, "real"), (synthesized, SYNTH_COLOR, "synth")] {
        for p in points {
            // pixel centers sit at integer coordinates
            let _ = writeln!(
                svg,
                "<circle class=\"{class}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius:.1}\" fill=\"{color}\" fill-opacity=\"0.8\"/>",
                p.u + 0.5,
                p.v + 0.5
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Range image of the lidar neighborhood around signal `index`.
pub fn signal_range_image(frame: &FrameBundle, d: &RadarDatagram, index: usize, r_l: f64, width: usize, height: usize) -> Result<GrayImage> {
    let s = d
        .signals
        .get(index)
        .ok_or_else(|| Error::OutOfRange(format!("signal index {index} of {}", d.len())))?;
    let anchor = spherical_to_cartesian(&s.spherical());
    let cloud = frame.lidar_in_radar();
    let local = local_cloud(&cloud, &anchor, r_l);
    Ok(build_range_image(&local, &anchor, r_l, width, height).to_gray())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RadarSignal;
    use crate::fixture::{generate_frame, FixtureOptions, SceneKind};

    #[test]
    fn delta_heatmap_single_bright_pixel() {
        let img = distribution_heatmap(&ProbabilityGrid::delta(8, 6, 3, 2).unwrap());
        assert_eq!(img.data.iter().filter(|&&g| g > 0).count(), 1);
        assert_eq!(img.data[2 * 8 + 3], 255);
    }

    #[test]
    fn one_circle_per_signal() {
        let f = generate_frame(&FixtureOptions::new(SceneKind::Boxes, 1, 2), 0).bundle;
        let real = datagram_pixels(&f, f.ground_truth.as_ref().unwrap());
        let synth = &real[..10];
        let svg = overlay_svg(&f.image, &real, synth);
        assert_eq!(svg.matches("<circle").count(), real.len() + 10);
        assert_eq!(svg.matches("fill=\"blue\"").count(), 10);
        assert!(svg.contains("data:image/bmp;base64,Qk"));
    }

    #[test]
    fn empty_neighborhood_is_black() {
        let f = generate_frame(&FixtureOptions::new(SceneKind::Wall, 1, 2), 0).bundle;
        let d = RadarDatagram::new(f.id.clone(), vec![RadarSignal {
            r: 3.0,
            theta: 0.0,
            phi: 0.0,
            v: 0.0,
            rss: None,
        }]);
        let img = signal_range_image(&f, &d, 0, 1.0, 128, 32).unwrap();
        assert!(img.data.iter().all(|&g| g == 0));
        assert!(signal_range_image(&f, &d, 1, 1.0, 128, 32).is_err());
    }

    #[test]
    fn subsample_is_deterministic() {
        let items: Vec<u32> = (0..1000).collect();
        let a = subsample(&items, 0.2, &mut SeededRng::new(5, 0));
        let b = subsample(&items, 0.2, &mut SeededRng::new(5, 0));
        assert_eq!(a, b);
        assert!((150..250).contains(&a.len()));
    }
}
