//! End-to-end tests for the `contactq` binary: every subcommand runs
//! as a real process against files in a temp directory. A small table
//! dataset plus a two-epoch training run are shared across tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::LazyLock;

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_contactq")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawning contactq")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    #[allow(dead_code)]
    dir: TempDir,
    data: PathBuf,
    weights: PathBuf,
    model_dir: PathBuf,
}

/// Small dataset (24 base pairs, 1 augmentation) and a deliberately
/// short training run; tests only need valid artifacts, not a good
/// model.
static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    let model_dir = dir.path().join("model");
    run_ok(&[
        "generate",
        "--out",
        path_str(&data),
        "--plan",
        "table",
        "--augmentations",
        "1",
        "--seed",
        "7",
    ]);
    run_ok(&[
        "train",
        "--data",
        path_str(&data),
        "--out",
        path_str(&model_dir),
        "--epochs",
        "2",
    ]);
    let weights = model_dir.join("weights.json");
    Fixture {
        dir,
        data,
        weights,
        model_dir,
    }
});

fn any_points_file() -> PathBuf {
    FIXTURE.data.join("points/pair_00000.csv")
}

#[test]
fn generate_writes_manifest_and_points() {
    let manifest = fs::read_to_string(FIXTURE.data.join("manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let entries = parsed["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 48, "24 base pairs + 1 augmentation each");
    for entry in entries {
        let rel = entry["points_path"].as_str().unwrap();
        assert!(FIXTURE.data.join(rel).is_file(), "missing {rel}");
    }
    let points = fs::read_to_string(any_points_file()).unwrap();
    assert!(points.starts_with("x,y,z,surface\n"));
}

#[test]
fn generate_same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "generate",
            "--out",
            path_str(out),
            "--plan",
            "table",
            "--augmentations",
            "1",
            "--seed",
            "7",
        ]);
    }
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("points/pair_00013.csv")).unwrap(),
        fs::read(b.join("points/pair_00013.csv")).unwrap()
    );
}

#[test]
fn generate_unwritable_out_fails_without_manifest() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").unwrap();
    let out_path = blocker.join("data");
    let out = run(&["generate", "--out", path_str(&out_path), "--plan", "table"]);
    assert!(!out.status.success());
    assert!(!out_path.join("manifest.json").exists());
}

#[test]
fn train_writes_weights_and_history() {
    assert!(FIXTURE.weights.is_file());
    let history = fs::read_to_string(FIXTURE.model_dir.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,train_accuracy,val_loss,val_accuracy,lr");
    assert_eq!(lines.len(), 3, "header + 2 epochs");
}

#[test]
fn train_one_epoch_history_has_one_row() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("m");
    run_ok(&[
        "train",
        "--data",
        path_str(&FIXTURE.data),
        "--out",
        path_str(&out_dir),
        "--epochs",
        "1",
    ]);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2, "header + 1 epoch");
}

#[test]
fn train_missing_manifest_fails() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "train",
        "--data",
        path_str(dir.path()),
        "--out",
        path_str(&dir.path().join("m")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("manifest"), "stderr: {stderr}");
}

#[test]
fn score_reports_are_deterministic_and_self_describing() {
    let dir = TempDir::new().unwrap();
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    for out in [&r1, &r2] {
        run_ok(&[
            "score",
            "--weights",
            path_str(&FIXTURE.weights),
            "--points",
            path_str(&any_points_file()),
            "--out",
            path_str(out),
        ]);
    }
    let b1 = fs::read(&r1).unwrap();
    assert_eq!(b1, fs::read(&r2).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&b1).unwrap();
    let score = report["score"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&score));
    assert_eq!(report["weights_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["config"]["coarse_res"].as_u64(), Some(8));
    assert_eq!(report["config"]["fine_res"].as_u64(), Some(16));
    let probs = report["probabilities"].as_array().unwrap();
    assert_eq!(probs.len(), 3);
    let total: f64 = probs.iter().map(|p| p.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn score_without_out_prints_json_to_stdout() {
    let out = run_ok(&[
        "score",
        "--weights",
        path_str(&FIXTURE.weights),
        "--points",
        path_str(&any_points_file()),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["score"].is_number());
}

#[test]
fn score_malformed_points_reports_parse_location() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y,z,surface\n0,0,0,1\n0.1,oops,0,2\n").unwrap();
    let out = run(&[
        "score",
        "--weights",
        path_str(&FIXTURE.weights),
        "--points",
        path_str(&bad),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn score_emit_grids_writes_slices() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    run_ok(&[
        "score",
        "--weights",
        path_str(&FIXTURE.weights),
        "--points",
        path_str(&any_points_file()),
        "--out",
        path_str(&report),
        "--emit-grids",
    ]);
    let coarse = fs::read_to_string(dir.path().join("pair_00000_coarse_slice.csv")).unwrap();
    let fine = fs::read_to_string(dir.path().join("pair_00000_fine_slice.csv")).unwrap();
    assert_eq!(coarse.lines().count(), 8);
    assert_eq!(fine.lines().count(), 16);
    assert_eq!(coarse.lines().next().unwrap().split(',').count(), 8);
    for cell in fine.lines().flat_map(|l| l.split(',')) {
        let v: u8 = cell.parse().unwrap();
        assert!(v <= 3);
    }
}

#[test]
fn sweep_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    run_ok(&[
        "sweep",
        "--kind",
        "translate",
        "--steps",
        "5",
        "--weights",
        path_str(&FIXTURE.weights),
        "--out",
        path_str(&csv_path),
    ]);
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "parameter,p1,p2,p3,c");
    assert_eq!(lines.len(), 6, "header + 5 steps");
    let params: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(params[0], 0.0);
    assert!((params[4] - 0.6).abs() < 1e-12);
    assert!(params.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn sweep_rejects_unknown_kind() {
    let out = run(&[
        "sweep",
        "--kind",
        "wobble",
        "--weights",
        path_str(&FIXTURE.weights),
    ]);
    assert!(!out.status.success());
}

fn scene_csv(surfaces: &[(f64, usize)]) -> String {
    // Each surface is a tight 3x3 patch of points at the given x offset.
    let mut text = String::from("x,y,z,surface\n");
    for &(x0, id) in surfaces {
        for i in 0..3 {
            for j in 0..3 {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    x0,
                    i as f64 * 0.05,
                    j as f64 * 0.05,
                    id
                ));
            }
        }
    }
    text
}

#[test]
fn detect_lists_pairs_and_grows_with_fraction() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("scene.csv");
    // Patch gaps 0.02 / 0.08 / 0.10 against a per-surface diagonal of
    // sqrt(0.02) ~ 0.1414, so the three fractions admit 1, 2, then 3 pairs.
    fs::write(&scene, scene_csv(&[(0.0, 1), (0.02, 2), (0.1, 3)])).unwrap();

    let mut pair_sets = Vec::new();
    for fraction in ["0.2", "0.6", "0.9"] {
        let out = run_ok(&["detect", "--points", path_str(&scene), "--fraction", fraction]);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let diagonal = report["body_diagonal"].as_f64().unwrap();
        assert!((diagonal - 0.02f64.sqrt()).abs() < 1e-12);
        let pairs: Vec<(u64, u64)> = report["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| {
                assert!(p["gap"].as_f64().unwrap() >= 0.0);
                (p["id_a"].as_u64().unwrap(), p["id_b"].as_u64().unwrap())
            })
            .collect();
        pair_sets.push(pairs);
    }
    assert_eq!(pair_sets[0], vec![(1, 2)]);
    assert!(pair_sets[1].contains(&(2, 3)));
    assert!(pair_sets[2].contains(&(1, 3)));
    for w in pair_sets.windows(2) {
        assert!(
            w[0].iter().all(|p| w[1].contains(p)),
            "larger fraction must keep all pairs of the smaller one"
        );
    }
}

#[test]
fn detect_single_surface_fails() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("one.csv");
    fs::write(&scene, scene_csv(&[(0.0, 1)])).unwrap();
    let out = run(&["detect", "--points", path_str(&scene)]);
    assert!(!out.status.success());
}

#[test]
fn eval_reports_metrics_per_split() {
    let out = run_ok(&[
        "eval",
        "--weights",
        path_str(&FIXTURE.weights),
        "--data",
        path_str(&FIXTURE.data),
        "--split",
        "all",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["count"].as_u64(), Some(48));
    let accuracy = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&accuracy));
    assert!(report["in_band_rate"].is_number());
    assert_eq!(report["samples"].as_array().unwrap().len(), 48);
    assert_eq!(report["split"].as_str(), Some("all"));
}

#[test]
fn eval_missing_data_fails() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "eval",
        "--weights",
        path_str(&FIXTURE.weights),
        "--data",
        path_str(&dir.path().join("nope")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn env_vars_mirror_flags() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&[
        "generate",
        "--out",
        path_str(&a),
        "--plan",
        "table",
        "--augmentations",
        "1",
        "--seed",
        "123",
    ]);
    let out = Command::new(bin())
        .args(["generate", "--plan", "table", "--augmentations", "1"])
        .env("CONTACTQ_OUT", &b)
        .env("CONTACTQ_SEED", "123")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
}
