use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use radar_forge::dataset::{read_datagram_csv, FrameBundle, RadarDatagram};
use radar_forge::eval::{evaluate_frame, rss_range, EvalReport};
use radar_forge::predictors::GridView;
use radar_forge::synth::SynthesisReport;
use radar_forge::Error;

use crate::args::EvalArgs;
use crate::commands::synth::REPORT_LOG;
use crate::common::{open_manifest, par_map, resolve_sigma, thread_pool, write_file, Context, FrameFailure, Outcome, ResolvedSigma};
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct EvalRunReport {
    pub sigma: ResolvedSigma,
    pub grid_scale: f64,
    #[serde(flatten)]
    pub report: EvalReport,
    pub failures: Vec<FrameFailure>,
}

/// Every `*.csv` datagram in `dir`, sorted by frame id.
pub fn read_prediction_dir(dir: &Path) -> CliResult<Vec<RadarDatagram>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut out = paths.iter().map(|p| read_datagram_csv(p)).collect::<radar_forge::Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    Ok(out)
}

/// Synthesis reports by frame id, if the directory has a log.
fn read_reports(dir: &Path) -> CliResult<BTreeMap<String, SynthesisReport>> {
    let path = dir.join(REPORT_LOG);
    if !path.is_file() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: SynthesisReport = serde_json::from_str(line).map_err(|e| Error::parse(&path, i + 1, e.to_string()))?;
        out.insert(r.frame_id.clone(), r);
    }
    Ok(out)
}

pub fn run(ctx: &Context, args: &EvalArgs) -> CliResult<Outcome> {
    let manifest = open_manifest(&args.gt)?;
    let preds = read_prediction_dir(&args.pred)?;
    if preds.is_empty() {
        return Err(CliError::Usage(format!("{}: no predicted datagrams", args.pred.display())));
    }
    let reports = read_reports(&args.pred)?;
    for p in &preds {
        if manifest.frame(&p.frame_id).is_none() {
            return Err(Error::FrameIdMismatch(format!("predicted frame {} is not in {}", p.frame_id, args.gt.display())).into());
        }
    }
    let pool = thread_pool(ctx.jobs)?;
    let descs: Vec<_> = preds.iter().map(|p| manifest.frame(&p.frame_id).expect("checked above")).collect();
    let mut failures = Vec::new();
    let mut pairs = Vec::new();
    for (p, r) in preds.iter().zip(par_map(&pool, &descs, |_, d| FrameBundle::load(d))) {
        match r {
            Ok(f) => pairs.push((f, p)),
            Err(e) => failures.push(FrameFailure::new(&p.frame_id, &e)),
        }
    }
    let sigma = resolve_sigma(args.grid.sigma, manifest.sigma, pairs.iter().map(|(f, _)| f))?;
    let norm = rss_range(pairs.iter().filter_map(|(f, _)| f.ground_truth.as_ref()));
    let rows = par_map(&pool, &pairs, |_, (f, p)| {
        let view = GridView::new(f, args.grid.grid_scale)?;
        evaluate_frame(f, p, &sigma.covariance, &view, norm, reports.get(&f.id))
    });
    let mut ok = Vec::new();
    for ((f, _), r) in pairs.iter().zip(rows) {
        match r {
            Ok(row) => ok.push(row),
            Err(e) => failures.push(FrameFailure::new(&f.id, &e)),
        }
    }
    failures.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));
    if ok.is_empty() {
        let why = failures.first().map(|f| format!("{}: {}", f.frame_id, f.error)).unwrap_or_default();
        return Err(CliError::Usage(format!("no frame could be evaluated ({why})")));
    }
    let report = EvalReport::from_rows(ok)?;
    write_file(&args.report, report.to_csv())?;
    let summary = report.summary();
    let run = EvalRunReport {
        sigma,
        grid_scale: args.grid.grid_scale,
        report,
        failures: failures.clone(),
    };
    Outcome::new(summary, &run, failures)
}
