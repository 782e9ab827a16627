use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use radar_forge::dataset::{read_datagram_csv, write_datagram_csv, RadarDatagram};
use radar_forge::distribution::ProbabilityGrid;
use radar_forge::fixture::{write_fixture, FixtureOptions, SceneKind};

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_radar-forge"));
    c.env_remove("RADAR_FORGE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn fixture(scene: SceneKind, frames: usize) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_fixture(&dir.path().join("data"), &FixtureOptions::new(scene, frames, 9)).unwrap();
    (dir, manifest)
}

/// Straight-ahead delta predictions with a fixed count for every frame.
fn delta_predictions(dir: &Path, ids: &[&str], count: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for id in ids {
        std::fs::write(dir.join(format!("{id}.grid")), ProbabilityGrid::delta(160, 120, 80, 60).unwrap().to_binary_bytes()).unwrap();
        std::fs::write(dir.join(format!("{id}.count")), format!("{count}\n")).unwrap();
    }
}

#[test]
fn empty_manifest_is_an_invocation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.txt");
    std::fs::write(&m, "dataset = nothing\n").unwrap();
    let out = run(&["gt-dist", "--manifest", s(&m), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["make-fixture", "--scene", "wall", "--frames", "0", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["make-fixture", "--scene", "moon", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_count_file_fails_only_that_frame() {
    let (dir, m) = fixture(SceneKind::Wall, 2);
    let pred = dir.path().join("pred");
    delta_predictions(&pred, &["wall_0000", "wall_0001"], 4);
    std::fs::remove_file(pred.join("wall_0001.count")).unwrap();
    let out_dir = dir.path().join("syn");
    let out = run(&["synth", "--manifest", s(&m), "--predictor", "external", "--pred-dir", s(&pred), "--out-dir", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall_0001"));
    assert_eq!(read_datagram_csv(&out_dir.join("wall_0000.csv")).unwrap().len(), 4);
    assert!(!out_dir.join("wall_0001.csv").exists());
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let (dir, m) = fixture(SceneKind::Boxes, 2);
    let report = dir.path().join("eval.csv");
    let out = run(&["--json", "eval", "--pred", s(&dir.path().join("data/radar")), "--gt", s(&m), "--report", s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["mean_kl"].as_f64().unwrap() < 1e-6, "{v}");
    assert_eq!(v["mean_count_rel_error"].as_f64().unwrap(), 0.0);
    let csv = std::fs::read_to_string(report).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 1, "{csv}");
}

#[test]
fn doubled_prediction_has_unit_count_error() {
    let (dir, m) = fixture(SceneKind::Boxes, 2);
    let pred = dir.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    for id in ["boxes_0000", "boxes_0001"] {
        let gt = read_datagram_csv(&dir.path().join(format!("data/radar/{id}.csv"))).unwrap();
        let doubled: Vec<_> = gt.signals.iter().chain(&gt.signals).copied().collect();
        write_datagram_csv(&pred.join(format!("{id}.csv")), &RadarDatagram::new(id, doubled)).unwrap();
    }
    let out = run(&["--json", "eval", "--pred", s(&pred), "--gt", s(&m), "--report", s(&dir.path().join("r.csv"))]);
    assert!(out.status.success());
    let v = json(&out);
    for row in v["rows"].as_array().unwrap() {
        assert!((row["count_rel_error"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{row}");
        // same shape, twice the weight: the distribution does not change
        assert!(row["kl"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn eval_rejects_unknown_frames() {
    let (dir, m) = fixture(SceneKind::Wall, 1);
    let pred = dir.path().join("pred");
    std::fs::create_dir_all(&pred).unwrap();
    let gt = read_datagram_csv(&dir.path().join("data/radar/wall_0000.csv")).unwrap();
    write_datagram_csv(&pred.join("elsewhere_0000.csv"), &RadarDatagram::new("elsewhere_0000", gt.signals)).unwrap();
    let out = run(&["eval", "--pred", s(&pred), "--gt", s(&m), "--report", s(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

fn train_args<'a>(m: &'a str, out: &'a str, epochs: &'a str) -> Vec<&'a str> {
    vec![
        "train-rss", "--manifest", m, "--epochs", epochs, "--rc", "4", "--range-width", "16", "--range-height", "4", "--samples-per-frame", "6",
        "--lr", "1e-3", "--out", out,
    ]
}

#[test]
fn zero_epochs_records_only_the_initial_loss() {
    let (dir, m) = fixture(SceneKind::Street, 1);
    let model = dir.path().join("m.rfnn");
    let out = run(&train_args(s(&m), s(&model), "0"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("m.rfnn.loss.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2, "{csv}");
    assert!(rows[1].starts_with("0,"));
}

#[test]
fn training_is_reproducible() {
    let (dir, m) = fixture(SceneKind::Street, 2);
    let (a, b) = (dir.path().join("a.rfnn"), dir.path().join("b.rfnn"));
    for p in [&a, &b] {
        let mut args = train_args(s(&m), s(p), "4");
        args.extend(["--seed", "17"]);
        assert!(run(&args).status.success());
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn five_percent_noise_replaces_five_of_one_hundred() {
    let (dir, m) = fixture(SceneKind::Wall, 1);
    let pred = dir.path().join("pred");
    delta_predictions(&pred, &["wall_0000"], 100);
    let out_dir = dir.path().join("syn");
    let out = run(&[
        "synth", "--manifest", s(&m), "--predictor", "external", "--pred-dir", s(&pred), "--noise", "0.05", "--out-dir", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(out_dir.join("synth_report.jsonl")).unwrap();
    let report: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    let replaced = report["noise_replaced"].as_array().unwrap();
    assert_eq!(replaced.len(), 5);
    let d = read_datagram_csv(&out_dir.join("wall_0000.csv")).unwrap();
    assert_eq!(d.len(), 100);
    let moved = d.signals.iter().filter(|s| s.theta.abs() > 1e-9 || s.phi.abs() > 1e-9).count();
    assert_eq!(moved, 5);
}

#[test]
fn overlay_draws_one_circle_per_signal() {
    let (dir, m) = fixture(SceneKind::Boxes, 1);
    let syn = dir.path().join("syn");
    assert!(run(&["synth", "--manifest", s(&m), "--predictor", "oracle", "--out-dir", s(&syn)]).status.success());
    let svg = dir.path().join("o.svg");
    let out = run(&[
        "--json", "vis", "--manifest", s(&m), "--frame", "boxes_0000", "--what", "overlay", "--pred", s(&syn), "--out", s(&svg),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let (real, synth) = (v["points"][0].as_u64().unwrap() as usize, v["points"][1].as_u64().unwrap() as usize);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"real\"").count(), real);
    assert_eq!(text.matches("class=\"synth\"").count(), synth);
    assert_eq!(synth, read_datagram_csv(&syn.join("boxes_0000.csv")).unwrap().len());
}

#[test]
fn vis_writes_heatmap_and_range_image() {
    let (dir, m) = fixture(SceneKind::Boxes, 1);
    for (what, name) in [("dist", "d.pgm"), ("rangeimg", "r.pgm")] {
        let out = dir.path().join(name);
        let o = run(&["vis", "--manifest", s(&m), "--frame", "boxes_0000", "--what", what, "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(std::fs::read(out).unwrap().starts_with(b"P5"));
    }
}

fn strip_seed(manifest: &Path) {
    let text = std::fs::read_to_string(manifest).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("seed")).collect();
    std::fs::write(manifest, kept.join("\n") + "\n").unwrap();
}

fn synth_with(m: &Path, out: &Path, flag: Option<&str>, env: Option<&str>) -> Output {
    let mut c = cli();
    c.args(["synth", "--manifest", s(m), "--predictor", "oracle", "--jitter", "--out-dir", s(out)]);
    if let Some(f) = flag {
        c.args(["--seed", f]);
    }
    if let Some(e) = env {
        c.env("RADAR_FORGE_SEED", e);
    }
    c.output().unwrap()
}

#[test]
fn seed_precedence_is_flag_manifest_env() {
    let (dir, m) = fixture(SceneKind::Boxes, 1);
    let csv = |name: &str| std::fs::read(dir.path().join(name).join("boxes_0000.csv")).unwrap();
    // manifest carries seed 9; the environment is ignored
    assert!(synth_with(&m, &dir.path().join("manifest"), None, Some("123")).status.success());
    assert!(synth_with(&m, &dir.path().join("flag9"), Some("9"), None).status.success());
    assert_eq!(csv("manifest"), csv("flag9"));
    // a flag beats the manifest
    assert!(synth_with(&m, &dir.path().join("flag123"), Some("123"), None).status.success());
    assert_ne!(csv("flag123"), csv("flag9"));
    // without a manifest seed the environment applies
    strip_seed(&m);
    assert!(synth_with(&m, &dir.path().join("env"), None, Some("123")).status.success());
    assert_eq!(csv("env"), csv("flag123"));
    assert!(synth_with(&m, &dir.path().join("default"), None, None).status.success());
    assert!(synth_with(&m, &dir.path().join("zero"), Some("0"), None).status.success());
    assert_eq!(csv("default"), csv("zero"));
    assert_eq!(synth_with(&m, &dir.path().join("bad"), None, Some("minus one")).status.code(), Some(2));
}

#[test]
fn gt_dist_writes_the_external_protocol() {
    let (dir, m) = fixture(SceneKind::Boxes, 2);
    let out_dir = dir.path().join("gt");
    let out = run(&["--json", "--jobs", "2", "gt-dist", "--manifest", s(&m), "--grid-scale", "0.5", "--out-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["frames"].as_array().unwrap().len(), 2);
    for id in ["boxes_0000", "boxes_0001"] {
        let grid = ProbabilityGrid::read_binary(&out_dir.join(format!("{id}.grid"))).unwrap();
        assert_eq!((grid.width(), grid.height()), (80, 60));
        assert!(std::fs::read(out_dir.join(format!("{id}.pgm"))).unwrap().starts_with(b"P5"));
        let count = std::fs::read_to_string(out_dir.join(format!("{id}.count"))).unwrap();
        assert!(count.ends_with('\n') && count.trim().parse::<usize>().unwrap() > 0);
    }
    // ground truth fed back through the external predictor
    let syn = dir.path().join("syn");
    let out = run(&["synth", "--manifest", s(&m), "--predictor", "external", "--pred-dir", s(&out_dir), "--out-dir", s(&syn)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn frames_without_ground_truth_are_partial_failures() {
    let (dir, m) = fixture(SceneKind::Boxes, 2);
    std::fs::remove_file(dir.path().join("data/radar/boxes_0001.csv")).unwrap();
    let text = std::fs::read_to_string(&m).unwrap().replace("radar = radar/boxes_0001.csv\n", "");
    std::fs::write(&m, text).unwrap();
    let out = run(&["gt-dist", "--manifest", s(&m), "--out-dir", s(&dir.path().join("gt"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("gt/boxes_0000.grid").exists());
}

#[test]
fn heuristic_synthesis_with_model_fills_strengths() {
    let (dir, m) = fixture(SceneKind::Street, 2);
    let model = dir.path().join("m.rfnn");
    assert!(run(&train_args(s(&m), s(&model), "2")).status.success());
    let syn = dir.path().join("syn");
    let out = run(&[
        "--json", "synth", "--manifest", s(&m), "--predictor", "heuristic", "--radar", "msc", "--model", s(&model), "--out-dir", s(&syn),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["heuristic"].is_object(), "{v}");
    let d = read_datagram_csv(&syn.join("street_0000.csv")).unwrap();
    assert!(!d.is_empty());
    assert!(d.signals.iter().all(|s| s.rss.is_some_and(f64::is_finite)));
}
