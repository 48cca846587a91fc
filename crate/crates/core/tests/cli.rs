use std::fs;
use std::path::{Path, PathBuf};

use raydio::cli::{run, EXIT_OK, EXIT_USAGE};
use raydio::dataset::{Manifest, Split};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn raydio(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("raydio").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scene_file(name: &str) -> String {
    format!("{}/scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"
[dataset]
scenes = ["shoebox"]
n_tx = 2
n_rx_per_tx = 2
image_size = 128
split_ratios = [0.5, 0.5, 0.0]
"#;

fn tiny_dataset(dir: &Path) -> PathBuf {
    let config = dir.join("run.toml");
    fs::write(&config, TINY).unwrap();
    let out = dir.join("data");
    let r = raydio(&["gen-dataset", "--config", s(&config), "--out", s(&out), "--jobs", "2", "--n-rx-per-tx", "2"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    out
}

#[test]
fn trace_prints_json_with_paths() {
    let r = raydio(&["trace", "--scene", &scene_file("shoebox"), "--tx", "1,1,1", "--rx", "4,3,1.5", "--max-order", "2"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let csi = raydio::tracer::csi_from_json(&r.stdout).unwrap();
    assert!(!csi.paths.is_empty());
    assert!(csi.paths.iter().all(|p| p.order() <= 2));
}

#[test]
fn trace_csv_has_fixed_header() {
    let r = raydio(&["trace", "--scene", "shoebox", "--tx", "1,1,1", "--rx", "4,3,1.5", "--format", "csv"]);
    assert_eq!(r.code, EXIT_OK);
    let mut lines = r.stdout.lines();
    assert_eq!(lines.next(), Some(raydio::tracer::CSV_HEADER));
    assert!(lines.count() >= 1);
}

#[test]
fn missing_scene_exits_two() {
    let r = raydio(&["trace", "--scene", "/nonexistent/room.json", "--tx", "1,1,1", "--rx", "2,2,2"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.stderr.contains("room.json"), "{}", r.stderr);
    assert!(r.stdout.is_empty());
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(raydio(&["trace", "--scene", "shoebox", "--tx", "1,1", "--rx", "2,2,2"]).code, EXIT_USAGE);
    assert_eq!(raydio(&["no-such-command"]).code, EXIT_USAGE);
    assert_eq!(raydio(&["plot", "--out", "/tmp/x"]).code, EXIT_USAGE);
}

#[test]
fn every_subcommand_has_help() {
    for cmd in ["trace", "render-views", "gen-dataset", "split", "reconstruct", "evaluate", "plot"] {
        let r = raydio(&[cmd, "--help"]);
        assert_eq!(r.code, EXIT_OK, "{cmd}");
        assert!(r.stdout.contains("Usage"), "{cmd}");
    }
}

#[test]
fn render_views_writes_nine_images() {
    let dir = tempfile::tempdir().unwrap();
    let r = raydio(&[
        "render-views", "--scene", "office", "--tx", "2,2,1.5", "--rx", "5,4,1.2", "--out", s(dir.path()), "--image-size", "64", "--id", "demo",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(r.stdout.lines().count(), 9);
    assert!(dir.path().join("demo_px.png").exists());
    assert_eq!(image::image_dimensions(dir.path().join("demo_xy.png")).unwrap(), (64, 64));
}

#[test]
fn dry_run_counts_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let r = raydio(&["gen-dataset", "--dry-run", "--out", s(&out), "--scenes", "shoebox,lshape", "--n-tx", "3", "--n-rx-per-tx", "4"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("total: 24 samples"), "{}", r.stdout);
    assert!(!out.exists());
}

#[test]
fn tiny_config_generates_four_samples_idempotently() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_dataset(dir.path());
    let manifest_path = out.join("manifest.jsonl");
    let first = fs::read(&manifest_path).unwrap();
    let m = Manifest::from_jsonl(std::str::from_utf8(&first).unwrap()).unwrap();
    assert_eq!(m.records.len(), 4);
    assert_eq!(m.header.config["dataset"]["n_tx"], 2);
    assert!(m.header.config.get("reconstruct").is_some());

    let config = dir.path().join("run.toml");
    let again = raydio(&["gen-dataset", "--config", s(&config), "--out", s(&out), "--n-rx-per-tx", "2"]);
    assert_eq!(again.code, EXIT_OK);
    assert!(again.stdout.contains("0 rendered, 4 skipped"), "{}", again.stdout);
    assert_eq!(fs::read(&manifest_path).unwrap(), first);
}

#[test]
fn split_rewrites_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_dataset(dir.path());
    let manifest = out.join("manifest.jsonl");
    let resplit = dir.path().join("resplit.jsonl");
    let r = raydio(&["split", "--manifest", s(&manifest), "--ratios", "0,0,1", "--seed", "9", "--out", s(&resplit)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let m = Manifest::load(&resplit).unwrap();
    assert!(m.records.iter().all(|r| r.split == Split::Test));
    assert_eq!(m.header.split.seed, 9);
    assert_eq!(raydio(&["split", "--manifest", s(&manifest), "--ratios", "0.9,0.9,0.1"]).code, EXIT_USAGE);
}

#[test]
fn reconstruct_targets_then_plot_overlays() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_dataset(dir.path());
    let report = dir.path().join("report.json");
    let r = raydio(&[
        "reconstruct", "--images", s(&out.join("targets")), "--manifest", s(&out.join("manifest.jsonl")), "--out", s(&report),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.starts_with("samples          4"), "{}", r.stdout);
    let parsed: raydio::cli::ReconstructReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.samples.len(), 4);
    for s in parsed.samples.iter().filter(|s| s.well_separated) {
        assert_eq!(s.recall, 1.0, "{}", s.sample_id);
    }

    let figs = dir.path().join("figs");
    let p = raydio(&["plot", "--report", s(&report), "--out", s(&figs), "--size", "128"]);
    assert_eq!(p.code, EXIT_OK, "{}", p.stderr);
    assert_eq!(fs::read_dir(&figs).unwrap().count(), 4);
}

#[test]
fn reconstruct_of_an_empty_directory_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_dataset(dir.path());
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let r = raydio(&["reconstruct", "--images", s(&empty), "--manifest", s(&out.join("manifest.jsonl"))]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.starts_with("samples          0"));
}

#[test]
fn evaluating_targets_against_themselves_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_dataset(dir.path());
    let r = raydio(&["evaluate", "--predictions", s(&out.join("targets")), "--manifest", s(&out.join("manifest.jsonl")), "--split", "train"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["samples"], 2);
    assert_eq!(v["mean_mae"], 0.0);
}

#[test]
fn loss_log_plots_and_missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("train.jsonl");
    let lines: Vec<String> = (1..=6)
        .map(|e| format!("{{\"epoch\":{e},\"train_loss\":{},\"val_loss\":{}}}", 0.5 / e as f64, 0.6 / e as f64))
        .collect();
    fs::write(&log, lines.join("\n")).unwrap();
    let r = raydio(&["plot", "--loss-log", s(&log), "--out", s(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(image::image_dimensions(dir.path().join("loss.png")).unwrap(), (800, 500));
    let missing = raydio(&["plot", "--loss-log", s(&dir.path().join("nope.jsonl")), "--out", s(dir.path())]);
    assert_eq!(missing.code, EXIT_USAGE);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "[dataset]\nscenes = [\"lshape\"]\nn_tx = 5\nn_rx_per_tx = 5\n").unwrap();
    let from_file = raydio(&["gen-dataset", "--dry-run", "--config", s(&config), "--n-rx-per-tx", "5"]);
    assert!(from_file.stdout.contains("total: 25 samples"), "{}", from_file.stdout);
    let flagged = raydio(&["gen-dataset", "--dry-run", "--config", s(&config), "--n-tx", "2", "--n-rx-per-tx", "5"]);
    assert!(flagged.stdout.contains("total: 10 samples"), "{}", flagged.stdout);
}
