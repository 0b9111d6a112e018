//! End-to-end tests of the `ergolab` binary: exit codes, diagnostics,
//! output files, determinism, and the shipped demo configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergolab"))
}

fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (killed by signal?)")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn walk_config(out_dir: &Path) -> String {
    format!(
        r#"{{
  "experiment": "drift",
  "driver": {{ "kind": "iid", "probs": [0.75, 0.25] }},
  "space": {{ "kind": "banach", "dim": 1, "norm": "l2" }},
  "maps": [
    {{ "kind": "translation", "t": [1.0] }},
    {{ "kind": "translation", "t": [-1.0] }}
  ],
  "basepoint": {{ "kind": "vector", "coords": [0.0] }},
  "horizon": 10000,
  "seeds": [1, 2, 3, 4, 5, 6, 7, 8],
  "expected_drift": 0.5,
  "output_dir": {out:?}
}}"#,
        out = out_dir.display().to_string()
    )
}

#[test]
fn drift_walk_reports_half_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(tmp.path(), &walk_config(&out_dir));
    let out = run_bin(&["drift", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let summary = read_json(&out_dir.join("summary.json"));
    let a_hat = summary["metrics"]["a_hat_as"].as_f64().unwrap();
    assert!((a_hat - 0.5).abs() < 0.02, "a_hat = {a_hat}");
    assert_eq!(summary["verdict"], true);
    let grid = std::fs::read_to_string(out_dir.join("drift_grid.csv")).unwrap();
    assert!(grid.starts_with("n,rate\n"));
}

#[test]
fn goodtimes_zero_delta_on_additive_cocycle_exits_zero_with_density_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let text = format!(
        r#"{{
  "experiment": "goodtimes",
  "driver": {{ "kind": "deterministic", "sequence": [0] }},
  "space": {{ "kind": "banach", "dim": 1, "norm": "l2" }},
  "maps": [ {{ "kind": "translation", "t": [0.3] }} ],
  "basepoint": {{ "kind": "vector", "coords": [0.0] }},
  "horizon": 2048,
  "seeds": [1, 2],
  "delta": {{ "kind": "zero" }},
  "output_dir": {out:?}
}}"#,
        out = out_dir.display().to_string()
    );
    let config = write_config(tmp.path(), &text);
    let out = run_bin(&["goodtimes", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["metrics"]["density_min"], 1.0);
    assert_eq!(summary["metrics"]["density_mean"], 1.0);
}

#[test]
fn missing_map_for_second_symbol_exits_two_with_line_anchor() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let text = walk_config(&out_dir).replace(
        "    { \"kind\": \"translation\", \"t\": [1.0] },\n    { \"kind\": \"translation\", \"t\": [-1.0] }",
        "    { \"kind\": \"translation\", \"t\": [1.0] }",
    );
    let config = write_config(tmp.path(), &text);
    let out = run_bin(&["drift", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("missing map for symbol 1"), "stderr: {err}");
    // The diagnostic is anchored to the line of the "maps" key.
    let maps_line = text.lines().position(|l| l.contains("\"maps\"")).unwrap() + 1;
    assert!(err.contains(&format!("config.json:{maps_line}:")), "stderr: {err}");
    assert!(!out_dir.exists(), "no outputs on config errors");
}

#[test]
fn malformed_json_exits_two_with_parse_line() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "{\n  \"experiment\": \"drift\",\n  \"horizon\": oops\n}\n";
    let config = write_config(tmp.path(), text);
    let out = run_bin(&["drift", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("config.json:3:"), "stderr: {}", stderr(&out));
}

#[test]
fn subcommand_and_config_experiment_must_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(tmp.path(), &walk_config(&out_dir));
    let out = run_bin(&["banach", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("\"drift\"") && err.contains("\"banach\""), "stderr: {err}");
}

#[test]
fn verdict_failure_exits_one_and_leaves_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let text = walk_config(&out_dir).replace("\"expected_drift\": 0.5", "\"expected_drift\": 0.9");
    let config = write_config(tmp.path(), &text);
    let out = run_bin(&["drift", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "stderr: {}", stderr(&out));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["verdict"], false);
}

#[test]
fn graded_blowup_in_high_dimension_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    // diag(2, 1, 1/2) iterated: gamma spread grows linearly, and the graded
    // fallback only covers 2x2, so a long horizon is a numerical failure.
    let text = format!(
        r#"{{
  "experiment": "oseledets",
  "driver": {{ "kind": "deterministic", "sequence": [0] }},
  "maps": [
    {{ "kind": "matrix", "m": [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]] }}
  ],
  "horizon": 400,
  "seeds": [1],
  "output_dir": {out:?}
}}"#,
        out = out_dir.display().to_string()
    );
    let config = write_config(tmp.path(), &text);
    let out = run_bin(&["oseledets", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("graded"), "stderr: {}", stderr(&out));
}

#[test]
fn seeds_and_horizon_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(tmp.path(), &walk_config(&out_dir));
    let out = run_bin(&[
        "drift",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "9,10,11,12",
        "--horizon",
        "4096",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["horizon"], 4096);
    assert_eq!(summary["seeds"], serde_json::json!([9, 10, 11, 12]));
    // The effective config is copied, so rerunning it reproduces the run.
    let copied = read_json(&out_dir.join("config.json"));
    assert_eq!(copied["horizon"], 4096);
}

#[test]
fn reruns_into_the_same_directory_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(tmp.path(), &walk_config(&out_dir));
    let args = ["drift", "--config", config.to_str().unwrap()];
    assert_eq!(code(&run_bin(&args)), 0);
    let names = ["summary.json", "drift_grid.csv", "config.json"];
    let first: Vec<Vec<u8>> =
        names.iter().map(|n| std::fs::read(out_dir.join(n)).unwrap()).collect();
    assert_eq!(code(&run_bin(&args)), 0);
    for (name, before) in names.iter().zip(&first) {
        let after = std::fs::read(out_dir.join(name)).unwrap();
        assert_eq!(&after, before, "{name} changed between identical runs");
    }
}

#[test]
fn bundle_on_an_empty_directory_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never-ran");
    let config = write_config(tmp.path(), &walk_config(&out_dir));
    let out = run_bin(&["bundle", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("summary.json"), "stderr: {}", stderr(&out));
}

#[test]
fn bundle_after_goodtimes_references_the_density_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let text = format!(
        r#"{{
  "experiment": "goodtimes",
  "driver": {{ "kind": "deterministic", "sequence": [0] }},
  "space": {{ "kind": "banach", "dim": 1, "norm": "l2" }},
  "maps": [ {{ "kind": "translation", "t": [1.0] }} ],
  "basepoint": {{ "kind": "vector", "coords": [0.0] }},
  "horizon": 256,
  "seeds": [1],
  "delta": {{ "kind": "zero" }},
  "rho": 0.25,
  "output_dir": {out:?}
}}"#,
        out = out_dir.display().to_string()
    );
    let config = write_config(tmp.path(), &text);
    assert_eq!(code(&run_bin(&["goodtimes", "--config", config.to_str().unwrap()])), 0);
    let out = run_bin(&["bundle", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["plots"][0]["file"], "density_prefix.csv");
    assert_eq!(manifest["plots"][0]["x_column"], "n");
    assert_eq!(manifest["plots"][0]["reference_line"], 0.75);
}

#[test]
fn shipped_demo_configs_all_pass() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, subcommand) in [
        ("drift_walk.json", "drift"),
        ("goodtimes_walk.json", "goodtimes"),
        ("wolffdenjoy_parabolic.json", "wolffdenjoy"),
        ("oseledets_triangular.json", "oseledets"),
        ("meanergodic_rotation.json", "meanergodic"),
    ] {
        let config = repo_config(name);
        assert!(config.is_file(), "missing demo config {}", config.display());
        let out_dir = tmp.path().join(name.trim_end_matches(".json"));
        let out = run_bin(&[
            subcommand,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{name} failed: {}", stderr(&out));
        let bundle = run_bin(&[
            "bundle",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&bundle), 0, "bundle for {name} failed: {}", stderr(&bundle));
        assert!(out_dir.join("manifest.json").is_file());
    }
}

#[test]
fn oseledets_manifest_pairs_rates_with_the_top_exponent_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = repo_config("oseledets_triangular.json");
    let args_run = [
        "oseledets",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--horizon",
        "20000",
    ];
    assert_eq!(code(&run_bin(&args_run)), 0);
    let args_bundle = [
        "bundle",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--horizon",
        "20000",
    ];
    assert_eq!(code(&run_bin(&args_bundle)), 0);
    let manifest = read_json(&out_dir.join("manifest.json"));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(manifest["plots"][0]["file"], "spectrum.csv");
    assert_eq!(manifest["plots"][0]["y_column"], "a_rate");
    let reference = manifest["plots"][0]["reference_line"].as_f64().unwrap();
    let expected = summary["metrics"]["reference_top"].as_f64().unwrap();
    assert!((reference - expected).abs() < 1e-15);
    // The triangular pair has top exponent ln 3.
    assert!((reference - 3.0_f64.ln()).abs() < 0.03, "reference = {reference}");
}
