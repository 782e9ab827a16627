use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radar_forge::dataset::SigmaSetting;
use radar_forge::fixture::SceneKind;

#[derive(Debug, Parser)]
#[command(name = "radar-forge", version, about = "Synthesize 4D radar datagrams from camera and lidar frames")]
pub struct Cli {
    /// Print the command's report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for frame-parallel work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize ground-truth datagrams into distribution grids and counts.
    GtDist(GtDistArgs),
    /// Synthesize radar datagrams from a distribution predictor.
    Synth(SynthArgs),
    /// Train the signal-strength network on ground-truth signals.
    TrainRss(TrainRssArgs),
    /// Score synthesized datagrams against ground truth.
    Eval(EvalArgs),
    /// Render heatmaps, overlays and range images.
    Vis(VisArgs),
    /// Generate a synthetic dataset with analytic geometry.
    MakeFixture(MakeFixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    Oracle,
    Heuristic,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RadarPreset {
    Vod,
    Astyx,
    Msc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VisKind {
    Dist,
    Overlay,
    Rangeimg,
}

fn parse_sigma(s: &str) -> Result<SigmaSetting, String> {
    SigmaSetting::parse(s)
}

fn parse_scene(s: &str) -> Result<SceneKind, String> {
    s.parse()
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

/// Mixture covariance and grid resolution shared by the rasterizing commands.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// `auto`, `su,sv` standard deviations or `sxx,sxy,syy`, in image pixels.
    #[arg(long, value_parser = parse_sigma)]
    pub sigma: Option<SigmaSetting>,
    /// Grid resolution relative to the camera image.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub grid_scale: f64,
}

#[derive(Debug, Args)]
pub struct GtDistArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub predictor: PredictorKind,
    /// Directory of `<id>.grid`/`<id>.pgm` and `<id>.count` files for the
    /// external predictor.
    #[arg(long)]
    pub pred_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of signals replaced by uniform clutter.
    #[arg(long, value_parser = parse_fraction)]
    pub noise: Option<f64>,
    /// Signal-strength model; without it signals carry no strength.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Override the manifest's radar characteristics.
    #[arg(long, value_enum)]
    pub radar: Option<RadarPreset>,
    /// Add a sub-pixel offset to every sampled pixel.
    #[arg(long)]
    pub jitter: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainRssArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4, value_parser = parse_positive)]
    pub lr: f64,
    /// Image patch half-size, pixels.
    #[arg(long, default_value_t = 50)]
    pub rc: usize,
    /// Lidar neighborhood radius, meters.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub rl: f64,
    #[arg(long, default_value_t = 128)]
    pub range_width: usize,
    #[arg(long, default_value_t = 32)]
    pub range_height: usize,
    #[arg(long, default_value_t = 50)]
    pub samples_per_frame: usize,
    /// Minibatch size (0 = whole training set).
    #[arg(long, default_value_t = 0)]
    pub batch_size: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of synthesized `<id>.csv` datagrams.
    #[arg(long)]
    pub pred: PathBuf,
    /// Manifest with the ground truth.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV report destination.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct VisArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub frame: String,
    #[arg(long, value_enum)]
    pub what: VisKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of synthesized datagrams to draw instead of, or next to,
    /// the ground truth.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Binary grid file to render with `--what dist`.
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    /// Signal index for `--what rangeimg`.
    #[arg(long, default_value_t = 0)]
    pub signal: usize,
    /// Fraction of points drawn in overlays.
    #[arg(long, default_value_t = 1.0, value_parser = parse_fraction)]
    pub subsample: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub rl: f64,
    #[arg(long, default_value_t = 128)]
    pub range_width: usize,
    #[arg(long, default_value_t = 32)]
    pub range_height: usize,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct MakeFixtureArgs {
    #[arg(long, value_parser = parse_scene)]
    pub scene: SceneKind,
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ground-truth signals per frame (scene default otherwise).
    #[arg(long)]
    pub signals: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
