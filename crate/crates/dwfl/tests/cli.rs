//! End-to-end tests of the `dwfl` binary surface.

use std::path::Path;
use std::process::{Command, Output};

fn dwfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwfl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, out_dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    let text = format!(
        "\
[data]
source = synthetic
n_samples = 180
n_classes = 3
seq_len = 6
alphabet_size = 6
separability = 0.9
data_seed = 4

[split]
n_clients = 3

[federation]
hidden_widths = 12

[client_train]
epochs = 3
batch_size = 16
dropout_rate = 0.2

[global_train]
epochs = 2
batch_size = 16
dropout_rate = 0.2

[run]
strategies = dwfl_avg,fedavg
seeds = 1,2
out_dir = {}
",
        out_dir.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(rest, _)| rest))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_produces_summary_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);

    let result = dwfl(&["run", "--config", config.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("dwfl_avg"));
    assert!(stdout.contains("fedavg"));

    for name in [
        "summary.csv",
        "config.resolved",
        "dataset.dset",
        "metrics_dwfl_avg.csv",
        "rounds_fedavg_seed2.log",
        "global_dwfl_avg_seed1.ckpt",
        "provenance_seed1.tsv",
    ] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn missing_config_path_is_a_named_error() {
    let result = dwfl(&["run", "--config", "/no/such/file.cfg"]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("/no/such/file.cfg"), "stderr: {stderr}");
}

#[test]
fn missing_manifest_is_a_named_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        "[data]\nsource = fasta\nmanifest = /missing/corpus.tsv\n\n[run]\nstrategies = fedavg\nout_dir = /tmp/x\n",
    )
    .unwrap();
    let result = dwfl(&["run", "--config", config.to_str().unwrap()]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("/missing/corpus.tsv"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);
    let mut text = std::fs::read_to_string(&config).unwrap();
    text.push_str("\n[federation]\nn_round = 1\n");
    std::fs::write(&config, text).unwrap();
    let result = dwfl(&["run", "--config", config.to_str().unwrap()]);
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("n_round"), "stderr: {stderr}");
}

#[test]
fn rerun_with_identical_config_is_byte_identical_outside_timing() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let config = write_config(dir.path(), &out_a);

    assert!(dwfl(&["run", "--config", config.to_str().unwrap()]).status.success());
    assert!(dwfl(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap()
    ])
    .status
    .success());

    for name in ["metrics_dwfl_avg.csv", "metrics_fedavg.csv"] {
        let a = std::fs::read_to_string(out_a.join(name)).unwrap();
        let b = std::fs::read_to_string(out_b.join(name)).unwrap();
        assert_eq!(strip_timing(&a), strip_timing(&b), "{name} differs");
    }
    for name in ["global_dwfl_avg_seed1.ckpt", "global_fedavg_seed2.ckpt", "dataset.dset"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn strategy_and_seed_overrides_reduce_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);
    let result = dwfl(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--strategy",
        "fedmax",
        "--seed-override",
        "9",
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("metrics_fedmax.csv").exists());
    assert!(out.join("global_fedmax_seed9.ckpt").exists());
    assert!(!out.join("metrics_dwfl_avg.csv").exists());
    let csv = std::fs::read_to_string(out.join("metrics_fedmax.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + 1 run + aggregate
}

#[test]
fn synth_inspect_activations_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);

    // synth writes the dataset container.
    let result = dwfl(&["synth", "--config", config.to_str().unwrap()]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let dataset = out.join("synthetic.dset");
    assert!(dataset.exists());

    // inspect summarizes it.
    let result = dwfl(&["inspect", dataset.to_str().unwrap()]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("samples: 180"), "stdout: {stdout}");
    assert!(stdout.contains("class_000"));

    // run to get a checkpoint, inspect it, then export activations.
    assert!(dwfl(&["run", "--config", config.to_str().unwrap()]).status.success());
    let ckpt = out.join("global_dwfl_avg_seed1.ckpt");
    let result = dwfl(&["inspect", ckpt.to_str().unwrap()]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("weight checkpoint"));
    assert!(stdout.contains("checksum:"));

    let result = dwfl(&["inspect", out.join("rounds_dwfl_avg_seed1.log").to_str().unwrap()]);
    assert!(result.status.success());
    assert!(String::from_utf8_lossy(&result.stdout).contains("round log"));

    let acts_dir = dir.path().join("acts");
    let result = dwfl(&[
        "activations",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        out.join("dataset.dset").to_str().unwrap(),
        "--out",
        acts_dir.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let csv = std::fs::read_to_string(acts_dir.join("activations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 181); // header + one row per sample
    assert!(csv.starts_with("act_0,"));
}

#[test]
fn worker_thread_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &out);
    let result = Command::new(env!("CARGO_BIN_EXE_dwfl"))
        .env("DWFL_THREADS", "1")
        .args(["run", "--config", config.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let result = Command::new(env!("CARGO_BIN_EXE_dwfl"))
        .env("DWFL_THREADS", "zero")
        .args(["run", "--config", config.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("DWFL_THREADS"));
}

#[test]
fn inspect_rejects_unrecognized_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.bin");
    std::fs::write(&path, b"this is not a container at all").unwrap();
    let result = dwfl(&["inspect", path.to_str().unwrap()]);
    assert!(!result.status.success());
}
