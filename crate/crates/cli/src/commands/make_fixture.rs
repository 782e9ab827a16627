use std::path::PathBuf;

use serde::Serialize;

use radar_forge::fixture::{write_fixture, FixtureOptions, SceneKind};

use crate::args::MakeFixtureArgs;
use crate::common::{resolve_seed, Context, Outcome};
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct FixtureReport {
    pub scene: SceneKind,
    pub frames: usize,
    pub seed: u64,
    pub manifest: PathBuf,
}

pub fn run(_ctx: &Context, args: &MakeFixtureArgs) -> CliResult<Outcome> {
    if args.frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    let seed = resolve_seed(args.seed, None)?;
    let opts = FixtureOptions {
        signals: args.signals,
        ..FixtureOptions::new(args.scene, args.frames, seed)
    };
    let manifest = write_fixture(&args.out_dir, &opts)?;
    let report = FixtureReport {
        scene: args.scene,
        frames: args.frames,
        seed,
        manifest,
    };
    let summary = format!("wrote {} {} frame(s) (seed {seed}); manifest at {}", report.frames, report.scene, report.manifest.display());
    Outcome::new(summary, &report, Vec::new())
}
