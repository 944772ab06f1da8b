use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use radar_fidelity::dem;
use radar_fidelity::{figure_eight_scenario, Extent, Pose2D, Scenario};
use radar_fidelity_cli::commands::Layout;
use radar_fidelity_cli::files::{read_scenario, write_scenario};
use radar_fidelity_cli::{RunManifest, SEED_ENV};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SMALL_MODEL: &str = r#"{
    "sa_centroids": 4, "sa_radius": 2.0, "sa_max_neighbors": 8,
    "sa_mlp_widths": [3, 8, 8], "global_mlp_widths": [8, 8], "head_widths": [8, 4, 2]
  }"#;

fn run(dir: &Path, args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radar-fidelity"));
    cmd.args(args).current_dir(dir).env_remove(SEED_ENV);
    if let Some(s) = seed {
        cmd.env(SEED_ENV, s);
    }
    cmd.output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args, None);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A straight drive that starts behind the sensor, so the first frames
/// see nothing.
fn drive_past(n: usize) -> Scenario {
    let track = (0..n)
        .map(|k| Pose2D::new(-10.0 + 3.0 * k as f64, 2.0, 0.0, 30.0, 0.0))
        .collect();
    Scenario::new(10.0, Pose2D::origin(), track, Extent::car()).unwrap()
}

fn write_manifest(dir: &Path, extra: &str) {
    let text = format!(
        r#"{{
  "scenario": "drive.csv",
  "train_scenarios": ["eight.csv"],
  "n_runs": 2,
  "seed": 5,
  "model": {SMALL_MODEL},
  "train": {{"epochs": 3, "batch_size": 8}}{extra}
}}
"#
    );
    fs::write(dir.join("manifest.json"), text).unwrap();
}

fn setup(dir: &Path) {
    write_scenario(&dir.join("drive.csv"), &drive_past(10)).unwrap();
    write_scenario(
        &dir.join("eight.csv"),
        &figure_eight_scenario(40, 25.0, 20.0).unwrap(),
    )
    .unwrap();
    write_manifest(dir, "");
}

#[test]
fn missing_scenario_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), "");
    let out = run(
        dir.path(),
        &["simulate", "--manifest", "manifest.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("drive.csv"), "{err}");
}

#[test]
fn unknown_manifest_key_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    write_manifest(dir.path(), r#", "n_rnus": 3"#);
    let out = run(
        dir.path(),
        &["simulate", "--manifest", "manifest.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_one_record_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    ok(dir.path(), &["simulate", "--manifest", "manifest.json"]);
    let layout = Layout::new(dir.path().join("out"));
    for path in [
        layout.run_file(0),
        layout.run_file(1),
        layout.reference_file(),
    ] {
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10, "{}", path.display());
        for (k, l) in lines.iter().enumerate() {
            assert!(l.starts_with(&format!("{{\"frame\":{k},")), "{l}");
        }
        assert!(
            lines[0].ends_with(r#""points":[]}"#),
            "target behind the sensor: {}",
            lines[0]
        );
    }
    assert!(!layout.run_file(2).exists());
}

#[test]
fn simulate_is_reproducible_and_seed_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let read = |out: &str| {
        let sim = dir.path().join(out).join("sim");
        [
            fs::read(sim.join("run_000.jsonl")).unwrap(),
            fs::read(sim.join("reference.jsonl")).unwrap(),
        ]
    };

    ok(
        dir.path(),
        &["simulate", "--manifest", "manifest.json", "--out", "a"],
    );
    ok(
        dir.path(),
        &[
            "simulate",
            "--manifest",
            "manifest.json",
            "--out",
            "b",
            "--jobs",
            "1",
        ],
    );
    assert!(read("a") == read("b"));

    let out = run(
        dir.path(),
        &["simulate", "--manifest", "manifest.json", "--out", "c"],
        Some("99"),
    );
    assert!(out.status.success());
    assert!(read("a")[1] != read("c")[1]);

    write_manifest(dir.path(), "");
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        text.replace(r#""seed": 5"#, r#""seed": 99"#),
    )
    .unwrap();
    ok(
        dir.path(),
        &["simulate", "--manifest", "manifest.json", "--out", "d"],
    );
    assert!(read("c") == read("d"));

    let bad = run(
        dir.path(),
        &["simulate", "--manifest", "manifest.json"],
        Some("-1"),
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn training_log_matches_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    ok(dir.path(), &["train", "--manifest", "manifest.json"]);
    let layout = Layout::new(dir.path().join("out"));

    let log = fs::read_to_string(layout.train_log()).unwrap();
    let rows: Vec<&str> = log.lines().collect();
    assert_eq!(rows[0], "epoch,loss,train_acc,test_acc");
    assert_eq!(rows.len(), 1 + 3);
    let logged: f64 = rows[3].split(',').nth(3).unwrap().parse().unwrap();

    let manifest = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
    let scenarios = vec![read_scenario(&dir.path().join("eight.csv")).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.dataset.seed);
    let data = dem::build_dataset(
        &scenarios,
        &manifest.radar,
        &manifest.surrogate,
        &manifest.dataset,
        &mut rng,
    )
    .unwrap();
    let model = dem::load(&layout.model_file()).unwrap();
    let recomputed = dem::accuracy(&model, &data.test).unwrap();
    assert!(
        (logged - recomputed).abs() <= 1e-12,
        "{logged} vs {recomputed}"
    );
}

#[test]
fn full_pipeline_produces_report() {
    let dir = tempfile::tempdir().unwrap();
    write_scenario(
        &dir.path().join("drive.csv"),
        &figure_eight_scenario(30, 30.0, 20.0).unwrap(),
    )
    .unwrap();
    write_scenario(
        &dir.path().join("eight.csv"),
        &figure_eight_scenario(40, 25.0, 20.0).unwrap(),
    )
    .unwrap();
    write_manifest(dir.path(), "");
    for step in ["simulate", "train"] {
        ok(dir.path(), &[step, "--manifest", "manifest.json"]);
    }
    ok(
        dir.path(),
        &[
            "evaluate",
            "--manifest",
            "manifest.json",
            "--sg-window",
            "7",
            "--sg-order",
            "2",
        ],
    );
    let out = ok(dir.path(), &["report", "--manifest", "manifest.json"]);

    let table = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["d_pp", "emd", "dem"]);

    let layout = Layout::new(dir.path().join("out"));
    let csv = fs::read_to_string(layout.report_csv()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 10);
    assert_eq!(lines.clone().count(), 30);
    assert!(lines.all(|l| l.split(',').count() == 10));

    let svg = fs::read_to_string(layout.report_svg()).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
}

#[test]
fn evaluate_rejects_bad_smoothing_window() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    ok(dir.path(), &["simulate", "--manifest", "manifest.json"]);
    ok(dir.path(), &["train", "--manifest", "manifest.json"]);
    let out = run(
        dir.path(),
        &[
            "evaluate",
            "--manifest",
            "manifest.json",
            "--sg-window",
            "4",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evaluate_without_model_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    ok(dir.path(), &["simulate", "--manifest", "manifest.json"]);
    let out = run(
        dir.path(),
        &["evaluate", "--manifest", "manifest.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.bin"));
}
