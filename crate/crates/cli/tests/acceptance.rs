//! End-to-end determinism check for the command-line driver: every
//! experiment subcommand, run twice with the same seed but different
//! thread caps, must produce byte-identical terminal output and
//! byte-identical CSV and JSON report files.

use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn run(args: &[&str], threads: &str, dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medreg"))
        .args(args)
        .env("MEDREG_THREADS", threads)
        .current_dir(dir)
        .output()
        .expect("the driver binary runs")
}

/// Runs one subcommand under thread caps 1 and 8 and asserts stdout,
/// stderr, exit status, and both report files agree byte for byte.
fn assert_deterministic(name: &str, args: &[&str]) {
    let dir_a = TempDir::new().unwrap();
    let dir_b = TempDir::new().unwrap();

    let mut full: Vec<&str> = args.to_vec();
    full.extend_from_slice(&["--csv", "out.csv", "--json", "out.json"]);

    let a = run(&full, "1", dir_a.path());
    let b = run(&full, "8", dir_b.path());

    assert!(
        a.status.success(),
        "{name} failed under 1 thread: {}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(
        a.status.code(),
        b.status.code(),
        "{name}: exit codes differ"
    );
    assert_eq!(a.stdout, b.stdout, "{name}: terminal summaries differ");
    assert_eq!(a.stderr, b.stderr, "{name}: diagnostics differ");

    let csv_a = std::fs::read(dir_a.path().join("out.csv")).unwrap();
    let csv_b = std::fs::read(dir_b.path().join("out.csv")).unwrap();
    assert_eq!(
        csv_a, csv_b,
        "{name}: CSV reports differ across thread caps"
    );
    assert!(!csv_a.is_empty(), "{name}: CSV report is empty");

    let json_a = std::fs::read(dir_a.path().join("out.json")).unwrap();
    let json_b = std::fs::read(dir_b.path().join("out.json")).unwrap();
    assert_eq!(
        json_a, json_b,
        "{name}: JSON reports differ across thread caps"
    );
    serde_json::from_slice::<serde_json::Value>(&json_a).expect("JSON report parses");

    // Same seed, same command, same machine: rerunning under the larger
    // cap must also reproduce itself.
    let again = run(&full, "8", dir_b.path());
    assert_eq!(b.stdout, again.stdout, "{name}: rerun differs");
    let csv_again = std::fs::read(dir_b.path().join("out.csv")).unwrap();
    assert_eq!(csv_b, csv_again, "{name}: rerun CSV differs");

    println!("ACCEPTANCE 10 [{name}]: byte-identical under thread caps 1 and 8");
}

#[test]
fn c10_reports_are_byte_identical_across_thread_caps() {
    assert_deterministic(
        "medbias",
        &[
            "medbias",
            "--model",
            "normal_mean:mu=0",
            "--model",
            "uniform_scale:theta=1",
            "--estimator",
            "uniform_mle",
            "--n",
            "40",
            "--reps",
            "20000",
            "--seed",
            "42",
        ],
    );
    assert_deterministic(
        "coverage",
        &[
            "coverage",
            "--model",
            "normal_mean:mu=0",
            "--model",
            "normal_mean:mu=1",
            "--procedure",
            "hulc:est=mean",
            "--n",
            "120",
            "--level",
            "0.1",
            "--level",
            "0.05",
            "--reps",
            "20000",
            "--seed",
            "42",
        ],
    );
    assert_deterministic(
        "duality",
        &[
            "duality",
            "--model",
            "threshold_normal:mu=0",
            "--estimator",
            "threshold_mean",
            "--n",
            "200",
            "--level",
            "0.05",
            "--level",
            "0.1",
            "--reps",
            "5000",
            "--seed",
            "42",
        ],
    );

    println!(
        "ACCEPTANCE 10: PASS — same seed gives byte-identical reports at MEDREG_THREADS=1 and 8"
    );
}

#[test]
fn c10_sweep_reports_are_byte_identical_across_thread_caps() {
    // The sweep subcommand builds its model grid from a config document.
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{
            "procedure": "hulc:est=threshold_mean",
            "n_grid": [100],
            "level_grid": [0.1],
            "reps": 20000,
            "seed": 42,
            "sweep": { "family": "threshold_normal", "h_grid": [-1, 0, 1] }
        }"#,
    )
    .unwrap();
    assert_deterministic("sweep", &["sweep", "--config", config.to_str().unwrap()]);
}
