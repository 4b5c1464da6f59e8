//! End-to-end checks of the `icpgen` binary: argument wiring, artifact
//! layout, and exit codes. Kept deliberately small — numeric behavior is
//! covered by the unit suites and the acceptance gate.

use std::path::Path;
use std::process::{Command, Output};

fn icpgen(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icpgen"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn presets_lists_every_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpgen(&["presets"], dir.path());
    assert!(out.status.success());
    let listing = stdout(&out);
    for name in [
        "gmm3",
        "gmm3-conditioned",
        "sinusoid-conditioned",
        "sinusoid-mixed2d",
        "swissroll",
        "mnist-conditioned",
        "mnist-smallbatch",
        "multinoulli",
    ] {
        assert!(listing.contains(name), "presets output missing {name}:\n{listing}");
    }
}

#[test]
fn train_sample_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let run_str = run.to_str().unwrap();

    let out = icpgen(
        &["train", "--preset", "gmm3", "--epochs", "2", "--out", run_str],
        dir.path(),
    );
    assert!(out.status.success(), "train failed: {}", stderr(&out));
    for artifact in ["config.json", "checkpoint.json", "convergence.csv", "timings.csv"] {
        assert!(run.join(artifact).is_file(), "missing {artifact}");
    }

    // Re-running without --overwrite must refuse with a config error.
    let out = icpgen(
        &["train", "--preset", "gmm3", "--epochs", "2", "--out", run_str],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "overwrite refusal: {}", stderr(&out));

    let checkpoint = run.join("checkpoint.json");
    let checkpoint_str = checkpoint.to_str().unwrap();
    let csv = dir.path().join("generated.csv");
    let out = icpgen(
        &["sample", "--checkpoint", checkpoint_str, "--count", "5", "--out", csv.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "sample failed: {}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6, "header + 5 rows:\n{text}");

    // count 0 still writes the header line.
    let empty = dir.path().join("empty.csv");
    let out = icpgen(
        &["sample", "--checkpoint", checkpoint_str, "--count", "0", "--out", empty.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success(), "sample --count 0 failed: {}", stderr(&out));
    let text = std::fs::read_to_string(&empty).unwrap();
    assert_eq!(text.lines().count(), 1, "header only:\n{text}");

    let out = icpgen(
        &["eval", "--checkpoint", checkpoint_str, "--sample-size", "200"],
        dir.path(),
    );
    assert!(out.status.success(), "eval failed: {}", stderr(&out));
    assert!(stdout(&out).contains("exact hungarian"), "eval output:\n{}", stdout(&out));

    // Exact evaluation is cubic; large sizes must be opted into via --approx.
    let out = icpgen(
        &["eval", "--checkpoint", checkpoint_str, "--sample-size", "5000"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "expected refusal: {}", stderr(&out));
    let out = icpgen(
        &["eval", "--checkpoint", checkpoint_str, "--sample-size", "5000", "--approx"],
        dir.path(),
    );
    assert!(out.status.success(), "eval --approx failed: {}", stderr(&out));
    assert!(stdout(&out).contains("greedy upper bound"), "eval output:\n{}", stdout(&out));
}

#[test]
fn failures_use_configuration_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = icpgen(&["train", "--preset", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error:"), "stderr: {}", stderr(&out));

    let out = icpgen(
        &["sample", "--checkpoint", "does-not-exist.json", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));

    // clap usage errors also exit 2.
    let out = icpgen(&["train", "--preset"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
