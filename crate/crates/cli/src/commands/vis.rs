use std::path::PathBuf;

use serde::Serialize;

use radar_forge::dataset::{read_datagram_csv, FrameBundle, RadarDatagram};
use radar_forge::distribution::ProbabilityGrid;
use radar_forge::eval::rasterize_datagram;
use radar_forge::predictors::GridView;
use radar_forge::sampler::SeededRng;
use radar_forge::vis::{datagram_pixels, distribution_heatmap, overlay_svg, signal_range_image, subsample};
use radar_forge::Error;

use crate::args::{VisArgs, VisKind};
use crate::common::{open_manifest, resolve_seed, resolve_sigma, write_file, Context, Outcome};
use crate::error::{CliError, CliResult};

/// Stream for overlay subsampling.
const SUBSAMPLE_STREAM: u64 = 0x7157;

#[derive(Debug, Serialize)]
pub struct VisReport {
    pub frame_id: String,
    pub what: String,
    pub out: PathBuf,
    pub width: usize,
    pub height: usize,
    /// Points drawn, for overlays.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<(usize, usize)>,
}

fn predicted(args: &VisArgs) -> CliResult<Option<RadarDatagram>> {
    args.pred
        .as_ref()
        .map(|dir| read_datagram_csv(&dir.join(format!("{}.csv", args.frame))).map_err(CliError::from))
        .transpose()
}

/// The synthesized datagram if given, else the ground truth.
fn subject(frame: &FrameBundle, pred: Option<RadarDatagram>) -> CliResult<RadarDatagram> {
    pred.or_else(|| frame.ground_truth.clone())
        .ok_or_else(|| Error::NoGroundTruth(frame.id.clone()).into())
}

pub fn run(_ctx: &Context, args: &VisArgs) -> CliResult<Outcome> {
    let manifest = open_manifest(&args.manifest)?;
    let desc = manifest
        .frame(&args.frame)
        .ok_or_else(|| CliError::Usage(format!("frame {:?} is not in {}", args.frame, args.manifest.display())))?;
    let frame = FrameBundle::load(desc)?;
    let pred = predicted(args)?;
    let mut report = VisReport {
        frame_id: frame.id.clone(),
        what: format!("{:?}", args.what).to_lowercase(),
        out: args.out.clone(),
        width: 0,
        height: 0,
        points: None,
    };
    match args.what {
        VisKind::Dist => {
            let grid = match &args.grid_file {
                Some(p) => ProbabilityGrid::read_binary(p)?,
                None => {
                    let d = subject(&frame, pred)?;
                    let sigma = resolve_sigma(args.grid.sigma, manifest.sigma, [&frame])?;
                    rasterize_datagram(&frame, &d, &sigma.covariance, &GridView::new(&frame, args.grid.grid_scale)?)?
                }
            };
            let img = distribution_heatmap(&grid);
            (report.width, report.height) = (img.width, img.height);
            write_file(&args.out, img.to_pgm())?;
        }
        VisKind::Overlay => {
            let seed = resolve_seed(args.seed, manifest.seed)?;
            let mut rng = SeededRng::new(seed, SUBSAMPLE_STREAM);
            let real = frame.ground_truth.as_ref().map(|d| datagram_pixels(&frame, d)).unwrap_or_default();
            let synth = pred.as_ref().map(|d| datagram_pixels(&frame, d)).unwrap_or_default();
            let real = subsample(&real, args.subsample, &mut rng);
            let synth = subsample(&synth, args.subsample, &mut rng);
            report.points = Some((real.len(), synth.len()));
            (report.width, report.height) = (frame.width(), frame.height());
            write_file(&args.out, overlay_svg(&frame.image, &real, &synth))?;
        }
        VisKind::Rangeimg => {
            let d = subject(&frame, pred)?;
            let img = signal_range_image(&frame, &d, args.signal, args.rl, args.range_width, args.range_height)?;
            (report.width, report.height) = (img.width, img.height);
            write_file(&args.out, img.to_pgm())?;
        }
    }
    let summary = format!("wrote {} of frame {} to {}", report.what, report.frame_id, args.out.display());
    Outcome::new(summary, &report, Vec::new())
}
