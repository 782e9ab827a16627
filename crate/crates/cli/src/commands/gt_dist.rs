use serde::Serialize;

use radar_forge::dataset::FrameBundle;
use radar_forge::predictors::{oracle_predict, GridView};
use radar_forge::vis::distribution_heatmap;
use radar_forge::Error;

use crate::args::GtDistArgs;
use crate::common::{create_dir, has_ground_truth, load_frames, open_manifest, par_map, resolve_sigma, thread_pool, write_file, Context, FrameFailure, Outcome, ResolvedSigma};
use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct GtDistFrame {
    pub frame_id: String,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Most likely grid cell `(u, v)`.
    pub argmax: (usize, usize),
}

#[derive(Debug, Serialize)]
pub struct GtDistReport {
    pub sigma: ResolvedSigma,
    pub grid_scale: f64,
    pub frames: Vec<GtDistFrame>,
    pub failures: Vec<FrameFailure>,
}

fn one_frame(frame: &FrameBundle, args: &GtDistArgs, sigma: &ResolvedSigma) -> radar_forge::Result<GtDistFrame> {
    let view = GridView::new(frame, args.grid.grid_scale)?;
    let pred = oracle_predict(frame, &sigma.covariance, &view)?;
    let path = |ext: &str| args.out_dir.join(format!("{}.{ext}", frame.id));
    write_file(&path("grid"), pred.grid.to_binary_bytes())?;
    write_file(&path("pgm"), distribution_heatmap(&pred.grid).to_pgm())?;
    write_file(&path("count"), format!("{}\n", pred.count))?;
    Ok(GtDistFrame {
        frame_id: frame.id.clone(),
        count: pred.count,
        width: view.width,
        height: view.height,
        argmax: pred.grid.argmax(),
    })
}

pub fn run(ctx: &Context, args: &GtDistArgs) -> CliResult<Outcome> {
    let manifest = open_manifest(&args.manifest)?;
    let pool = thread_pool(ctx.jobs)?;
    let (loaded, mut failures) = load_frames(&pool, &manifest);
    let mut frames = Vec::new();
    for (_, f) in loaded {
        if has_ground_truth(&f) {
            frames.push(f);
        } else {
            failures.push(FrameFailure::new(&f.id, &Error::NoGroundTruth(f.id.clone())));
        }
    }
    let sigma = resolve_sigma(args.grid.sigma, manifest.sigma, &frames)?;
    create_dir(&args.out_dir)?;
    let mut rows = Vec::new();
    for (f, r) in frames.iter().zip(par_map(&pool, &frames, |_, f| one_frame(f, args, &sigma))) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(FrameFailure::new(&f.id, &e)),
        }
    }
    failures.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    let report = GtDistReport {
        sigma,
        grid_scale: args.grid.grid_scale,
        frames: rows,
        failures: failures.clone(),
    };
    write_file(&args.out_dir.join("run.json"), serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n")?;
    let c = &sigma.covariance;
    let summary = format!(
        "wrote {} distribution(s) to {} (sigma xx={:.4} xy={:.4} yy={:.4} px², {:?}); {} frame(s) failed",
        report.frames.len(),
        args.out_dir.display(),
        c.xx,
        c.xy,
        c.yy,
        sigma.source,
        failures.len()
    );
    Outcome::new(summary, &report, failures)
}
