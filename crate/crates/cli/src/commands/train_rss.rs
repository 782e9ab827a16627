use std::path::PathBuf;

use serde::Serialize;

use radar_forge::dataset::FrameBundle;
use radar_forge::rss_net::{build_training_set, train, RssNetConfig, TrainConfig};
use radar_forge::sampler::SeededRng;

use crate::args::TrainRssArgs;
use crate::common::{has_ground_truth, load_frames, open_manifest, resolve_seed, thread_pool, write_file, Context, FrameFailure, Outcome};
use crate::error::CliResult;

/// Stream used to pick training signals, separate from initialization.
const SAMPLE_STREAM: u64 = 0x5A3F;

#[derive(Debug, Serialize)]
pub struct TrainReport {
    pub seed: u64,
    pub frames: usize,
    pub samples: usize,
    pub parameters: usize,
    pub epochs: usize,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub model: PathBuf,
    pub loss_csv: PathBuf,
    pub failures: Vec<FrameFailure>,
}

pub fn run(ctx: &Context, args: &TrainRssArgs) -> CliResult<Outcome> {
    let manifest = open_manifest(&args.manifest)?;
    let seed = resolve_seed(args.seed, manifest.seed)?;
    let pool = thread_pool(ctx.jobs)?;
    let (loaded, failures) = load_frames(&pool, &manifest);
    let frames: Vec<FrameBundle> = loaded.into_iter().map(|(_, f)| f).filter(has_ground_truth).collect();
    let config = RssNetConfig {
        patch_radius: args.rc,
        local_radius: args.rl,
        range_width: args.range_width,
        range_height: args.range_height,
        ..Default::default()
    };
    let samples = build_training_set(&frames, args.samples_per_frame, &config, &mut SeededRng::new(seed, SAMPLE_STREAM))?;
    let train_config = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        seed,
        batch_size: args.batch_size,
    };
    let (net, history) = pool.install(|| train(&samples, config, &train_config))?;
    net.save(&args.out)?;
    let loss_csv = args.loss_csv.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".loss.csv");
        p.into()
    });
    write_file(&loss_csv, history.to_csv())?;
    let report = TrainReport {
        seed,
        frames: frames.len(),
        samples: samples.len(),
        parameters: net.param_count(),
        epochs: args.epochs,
        steps: history.step_losses.len(),
        initial_loss: history.epoch_losses[0].1,
        final_loss: history.final_loss(),
        a_min: net.config.a_min,
        a_max: net.config.a_max,
        model: args.out.clone(),
        loss_csv,
        failures: failures.clone(),
    };
    let summary = format!(
        "trained on {} sample(s) from {} frame(s) for {} step(s): loss {:.3e} -> {:.3e}; model written to {}",
        report.samples,
        report.frames,
        report.steps,
        report.initial_loss,
        report.final_loss,
        args.out.display()
    );
    Outcome::new(summary, &report, failures)
}
