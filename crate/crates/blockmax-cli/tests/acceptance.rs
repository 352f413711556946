//! CLI acceptance: byte-identical artifacts from identical runs, strict
//! configuration validation, and clean failure modes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_blockmax")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("blockmax_cli_acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_3d_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        r#"
[data]
source = "synthetic"
shape = [200, 200, 200]
mean = 0.0
stddev = 5.0
seed = 42

[regions]
fit_offsets = [0, 0, 0]
fit_extent = [100, 100, 100]

[problem]
bounds = [50, 50, 50]
estimator = "map"
reference_block_multiple = 8

[optimizer]
init_points = 5
window = 15
tolerance = 1e-6
growth_factor = 0.5
seed = 7
max_iterations = 40

[output]
dir = "unused"
"#,
    )
    .unwrap();
    path
}

// -----------------------------------------------------------------------
// Criterion 10: identical config and seed reproduce artifacts byte for byte.
// -----------------------------------------------------------------------
#[test]
fn criterion_10_cmd_optimize_is_bit_deterministic() {
    let started = Instant::now();
    let dir = workdir("determinism");
    let config = write_3d_config(&dir);

    for run in ["a", "b"] {
        let status = Command::new(bin())
            .args(["optimize", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(run))
            .status()
            .unwrap();
        assert!(status.success(), "run {run} failed");
    }

    for artifact in [
        "run_log.jsonl",
        "archive.tsv",
        "front.tsv",
        "hv_trajectory.tsv",
        "evaluations.jsonl",
        "summary.json",
    ] {
        let a = std::fs::read(dir.join("a").join(artifact)).unwrap();
        let b = std::fs::read(dir.join("b").join(artifact)).unwrap();
        assert!(a == b, "{artifact} differs between identical runs");
        assert!(!a.is_empty(), "{artifact} is empty");
    }
    println!(
        "ACCEPTANCE 10 (cmd_optimize determinism): PASS in {:.1}s",
        started.elapsed().as_secs_f64()
    );
}

// -----------------------------------------------------------------------
// Supporting CLI contract checks.
// -----------------------------------------------------------------------
#[test]
fn unknown_config_keys_are_rejected() {
    let dir = workdir("unknown_key");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        "[data]\nsource = \"synthetic\"\nshape = [10]\nstddev = 1.0\ntypo_key = 1\n[problem]\nbounds = [5]\n[output]\ndir = \"o\"\n",
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["optimize", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "usage/config errors exit 1");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("typo_key"), "error names the bad key: {stderr}");
}

#[test]
fn missing_data_file_exits_2_without_artifacts() {
    let dir = workdir("missing_data");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "[data]\nsource = \"file\"\npath = \"{}\"\n[problem]\nbounds = [5]\n[output]\ndir = \"{}\"\n",
            dir.join("nope.grid").display(),
            dir.join("out").display()
        ),
    )
    .unwrap();
    let output = Command::new(bin())
        .args(["optimize", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "data errors exit 2");
    assert!(!dir.join("out").exists(), "no partial artifacts on failure");
}

#[test]
fn simulate_round_trips_through_file_source() {
    let dir = workdir("simulate");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "[data]\nsource = \"synthetic\"\nshape = [12, 9]\nstddev = 2.5\nseed = 3\n[problem]\nbounds = [6, 6]\n[output]\ndir = \"{}\"\n",
            dir.join("out").display()
        ),
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["simulate", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let grid = std::fs::read_to_string(dir.join("out").join("synthetic.grid")).unwrap();
    assert!(grid.starts_with("shape=12x9\n"));
    assert_eq!(grid.split_whitespace().count() - 1, 108, "header plus 108 values");
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = workdir("workers");
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "[data]\nsource = \"synthetic\"\nshape = [50, 50]\nstddev = 5.0\nseed = 11\n\
             [problem]\nbounds = [25, 25]\n\
             [optimizer]\ninit_points = 5\nwindow = 4\ntolerance = 1e-4\nseed = 3\nmax_iterations = 30\n\
             [output]\ndir = \"{}\"\n",
            dir.join("unused").display()
        ),
    )
    .unwrap();
    for (out, workers) in [("w1", "1"), ("w2", "2")] {
        let status = Command::new(bin())
            .args(["optimize", "--config"])
            .arg(&config)
            .args(["--workers", workers, "--out"])
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for artifact in ["run_log.jsonl", "archive.tsv", "hv_trajectory.tsv"] {
        let a = std::fs::read(dir.join("w1").join(artifact)).unwrap();
        let b = std::fs::read(dir.join("w2").join(artifact)).unwrap();
        assert!(a == b, "{artifact} depends on the worker count");
    }
}

#[test]
fn compare_refuses_mismatched_references() {
    let dir = workdir("compare_mismatch");
    for (name, reference) in [("mobo", "[0.1, 0.1]"), ("base", "[0.2, 0.2]")] {
        let sub = dir.join(name);
        std::fs::create_dir_all(&sub).unwrap();
        std::fs::write(
            sub.join("summary.json"),
            format!(
                "{{\"command\": \"{}\", \"label\": \"{name}\", \"reference\": {reference}, \"final_hv\": 0.5, \"archive_size\": 1, \"evaluations\": 3}}",
                if name == "mobo" { "optimize" } else { "baseline" }
            ),
        )
        .unwrap();
        std::fs::write(sub.join("hv_trajectory.tsv"), "iteration\thv\n0\t0\n1\t0.5\n").unwrap();
    }
    let output = Command::new(bin())
        .args(["compare", "--mobo"])
        .arg(dir.join("mobo"))
        .arg("--baseline")
        .arg(dir.join("base"))
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "mismatched reference is refused");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("reference"), "{stderr}");
}
