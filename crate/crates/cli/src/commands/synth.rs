use std::path::PathBuf;

use serde::Serialize;

use radar_forge::dataset::{datagram_to_csv, FrameBundle, RadarDatagram};
use radar_forge::predictors::{fit_heuristic, heuristic_predict, load_external_dir, oracle_predict, DistributionPrediction, GridView, HeuristicModel};
use radar_forge::rss_net::{predict_datagram_rss, RssNet};
use radar_forge::sampler::SeededRng;
use radar_forge::synth::{apply_noise, synthesize_frame, RadarSpec, SynthOptions, SynthesisReport};
use radar_forge::Error;

use crate::args::{PredictorKind, RadarPreset, SynthArgs};
use crate::common::{
    create_dir, has_ground_truth, load_frames, open_manifest, par_map, resolve_seed, resolve_sigma, thread_pool, write_file, Context, FrameFailure, Outcome,
    ResolvedSigma, SigmaSource,
};
use crate::error::{CliError, CliResult};

/// File name of the per-frame synthesis log inside the output directory.
pub const REPORT_LOG: &str = "synth_report.jsonl";

enum Predictor {
    Oracle(ResolvedSigma),
    Heuristic(HeuristicModel),
    External(PathBuf),
}

impl Predictor {
    fn predict(&self, frame: &FrameBundle, scale: f64) -> radar_forge::Result<DistributionPrediction> {
        match self {
            Predictor::Oracle(s) => oracle_predict(frame, &s.covariance, &GridView::new(frame, scale)?),
            Predictor::Heuristic(m) => heuristic_predict(frame, m, &GridView::new(frame, scale)?),
            Predictor::External(dir) => load_external_dir(dir, &frame.id),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SynthRunReport {
    pub seed: u64,
    pub predictor: String,
    pub radar: RadarSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ResolvedSigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<HeuristicModel>,
    pub noise: f64,
    pub frames: Vec<SynthesisReport>,
    pub failures: Vec<FrameFailure>,
}

struct Job<'a> {
    args: &'a SynthArgs,
    predictor: &'a Predictor,
    spec: RadarSpec,
    seed: u64,
    model: Option<&'a RssNet>,
}

impl Job<'_> {
    fn run(&self, index: usize, frame: &FrameBundle) -> radar_forge::Result<(RadarDatagram, SynthesisReport)> {
        let prediction = self.predictor.predict(frame, self.args.grid.grid_scale)?;
        let mut rng = SeededRng::for_frame(self.seed, index as u64);
        let options = SynthOptions {
            jitter: self.args.jitter,
            ..Default::default()
        };
        let (mut datagram, mut report) = synthesize_frame(frame, &prediction, &self.spec, &mut rng, &options)?;
        if let Some(p) = self.args.noise {
            apply_noise(&mut datagram, &mut report, p, &self.spec, &frame.ego, &mut rng)?;
        }
        if let Some(model) = self.model {
            datagram = predict_datagram_rss(&datagram, frame, model)?;
        }
        write_file(&self.args.out_dir.join(format!("{}.csv", frame.id)), datagram_to_csv(&datagram))?;
        Ok((datagram, report))
    }
}

pub fn run(ctx: &Context, args: &SynthArgs) -> CliResult<Outcome> {
    let manifest = open_manifest(&args.manifest)?;
    let seed = resolve_seed(args.seed, manifest.seed)?;
    let spec = match args.radar {
        Some(RadarPreset::Vod) => RadarSpec::vod(),
        Some(RadarPreset::Astyx) => RadarSpec::astyx(),
        Some(RadarPreset::Msc) => RadarSpec::msc(),
        None => manifest.radar,
    };
    let model = args.model.as_deref().map(RssNet::load).transpose()?;
    let pool = thread_pool(ctx.jobs)?;
    let (frames, mut failures) = load_frames(&pool, &manifest);
    let bundles = || frames.iter().map(|(_, f)| f);

    let (predictor, sigma, heuristic) = match args.predictor {
        PredictorKind::Oracle => {
            let s = resolve_sigma(args.grid.sigma, manifest.sigma, bundles())?;
            (Predictor::Oracle(s), Some(s), None)
        }
        PredictorKind::Heuristic => {
            let train: Vec<FrameBundle> = bundles().filter(|f| has_ground_truth(f)).cloned().collect();
            let mut m = fit_heuristic(&train).map_err(|e| CliError::Usage(format!("heuristic predictor: {e}")))?;
            let s = resolve_sigma(args.grid.sigma, manifest.sigma, &train)?;
            if s.source != SigmaSource::Estimated {
                m.sigma = s.covariance;
            }
            (Predictor::Heuristic(m), None, Some(m))
        }
        PredictorKind::External => {
            let dir = args
                .pred_dir
                .clone()
                .ok_or_else(|| CliError::Usage("--predictor external needs --pred-dir".into()))?;
            (Predictor::External(dir), None, None)
        }
    };

    create_dir(&args.out_dir)?;
    let job = Job {
        args,
        predictor: &predictor,
        spec,
        seed,
        model: model.as_ref(),
    };
    let results = par_map(&pool, &frames, |_, (i, f)| job.run(*i, f));
    let mut reports = Vec::new();
    for ((_, f), r) in frames.iter().zip(results) {
        match r {
            Ok((_, report)) => reports.push(report),
            Err(e) => failures.push(FrameFailure::new(&f.id, &e)),
        }
    }
    failures.sort_by(|a, b| a.frame_id.cmp(&b.frame_id));

    let mut log = String::new();
    for r in &reports {
        log.push_str(&serde_json::to_string(r).map_err(Error::from)?);
        log.push('\n');
    }
    write_file(&args.out_dir.join(REPORT_LOG), log)?;

    let emitted: usize = reports.iter().map(|r| r.emitted).sum();
    let requested: usize = reports.iter().map(|r| r.requested).sum();
    let summary = format!(
        "synthesized {} frame(s) into {}: {emitted} of {requested} requested signals emitted; {} frame(s) failed",
        reports.len(),
        args.out_dir.display(),
        failures.len()
    );
    let report = SynthRunReport {
        seed,
        predictor: format!("{:?}", args.predictor).to_lowercase(),
        radar: spec,
        sigma,
        heuristic,
        noise: args.noise.unwrap_or(0.0),
        frames: reports,
        failures: failures.clone(),
    };
    Outcome::new(summary, &report, failures)
}
