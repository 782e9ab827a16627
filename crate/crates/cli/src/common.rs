use std::path::Path;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use radar_forge::dataset::{load_manifest, FrameBundle, Manifest, SigmaSetting};
use radar_forge::distribution::Covariance2;
use radar_forge::predictors::estimate_sigma_for_frames;
use radar_forge::Error;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "RADAR_FORGE_SEED";
pub const DEFAULT_SEED: u64 = 0;

/// Options shared by every command.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub json: bool,
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameFailure {
    pub frame_id: String,
    pub error: String,
}

impl FrameFailure {
    pub fn new(frame_id: impl Into<String>, error: &Error) -> Self {
        Self {
            frame_id: frame_id.into(),
            error: error.to_string(),
        }
    }
}

/// What a command reports once it has run.
#[derive(Debug)]
pub struct Outcome {
    pub summary: String,
    pub json: serde_json::Value,
    pub failures: Vec<FrameFailure>,
}

impl Outcome {
    pub fn new<R: Serialize>(summary: String, report: &R, failures: Vec<FrameFailure>) -> CliResult<Self> {
        Ok(Self {
            summary,
            json: serde_json::to_value(report).map_err(Error::from)?,
            failures,
        })
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            CliError::EXIT_PARTIAL
        }
    }
}

/// Seed precedence: flag, then manifest, then `RADAR_FORGE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, manifest: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(manifest) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(e) => Err(CliError::Usage(format!("{SEED_ENV}: {e}"))),
    }
}

pub fn thread_pool(jobs: usize) -> CliResult<ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// Maps `f` over `items` on `pool`; results keep the input order.
pub fn par_map<T, R, F>(pool: &ThreadPool, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
}

pub fn open_manifest(path: &Path) -> CliResult<Manifest> {
    let m = load_manifest(path)?;
    if m.frames.is_empty() {
        return Err(CliError::Usage(format!("{}: manifest lists no frames", path.display())));
    }
    Ok(m)
}

/// Loads every frame of `manifest` in parallel, keeping manifest order.
/// The index is the frame's position in the manifest.
pub fn load_frames(pool: &ThreadPool, manifest: &Manifest) -> (Vec<(usize, FrameBundle)>, Vec<FrameFailure>) {
    let loaded = par_map(pool, &manifest.frames, |_, d| FrameBundle::load(d));
    let mut frames = Vec::new();
    let mut failures = Vec::new();
    for (i, (desc, r)) in manifest.frames.iter().zip(loaded).enumerate() {
        match r {
            Ok(f) => frames.push((i, f)),
            Err(e) => failures.push(FrameFailure::new(&desc.id, &e)),
        }
    }
    (frames, failures)
}

pub fn has_ground_truth(f: &FrameBundle) -> bool {
    f.ground_truth.as_ref().is_some_and(|d| !d.is_empty())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Flag,
    Manifest,
    Estimated,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResolvedSigma {
    #[serde(flatten)]
    pub covariance: Covariance2,
    pub source: SigmaSource,
}

/// Covariance precedence: flag, then manifest, then estimation from the
/// ground truth of `frames`.
pub fn resolve_sigma<'a, I>(flag: Option<SigmaSetting>, manifest: Option<SigmaSetting>, frames: I) -> CliResult<ResolvedSigma>
where
    I: IntoIterator<Item = &'a FrameBundle>,
{
    let (setting, source) = match (flag, manifest) {
        (Some(s), _) => (s, SigmaSource::Flag),
        (None, Some(s)) => (s, SigmaSource::Manifest),
        (None, None) => (SigmaSetting::Auto, SigmaSource::Estimated),
    };
    let (cov, source) = match setting {
        SigmaSetting::Fixed(c) => (c, source),
        SigmaSetting::Auto => {
            let with_gt: Vec<FrameBundle> = frames.into_iter().filter(|f| has_ground_truth(f)).cloned().collect();
            if with_gt.is_empty() {
                return Err(CliError::Usage("sigma = auto needs frames with ground truth; pass --sigma su,sv".into()));
            }
            (estimate_sigma_for_frames(&with_gt)?, SigmaSource::Estimated)
        }
    };
    Ok(ResolvedSigma { covariance: cov, source })
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> radar_forge::Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
