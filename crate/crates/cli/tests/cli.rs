//! End-to-end runs of the binary on a tiny synthetic IDX dataset.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spikeplast"));
    c.env("RUST_LOG", "warn").env_remove("SPIKEPLAST_DATA");
    c
}

fn idx_images(n: usize, pixels: impl Fn(usize, usize) -> u8) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0803u32, n as u32, 28, 28] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for i in 0..n {
        out.extend((0..784).map(|p| pixels(i, p)));
    }
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for v in [0x0801u32, labels.len() as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}

/// Class `c` lights a horizontal band starting at row `2c + 4`.
fn write_split(dir: &Path, prefix: &str, per_class: usize) {
    let n = per_class * 10;
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let images = idx_images(n, |i, p| {
        let (y, x) = (p / 28, p % 28);
        let band = 2 * (i % 10) + 4;
        if (band..band + 3).contains(&y) && (4..24).contains(&x) {
            200 + ((i * 7 + x) % 50) as u8
        } else {
            0
        }
    });
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), idx_labels(&labels)).unwrap();
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: std::path::PathBuf,
    config: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let mnist = root.join("data/mnist");
    fs::create_dir_all(&mnist).unwrap();
    write_split(&mnist, "train", 3);
    write_split(&mnist, "t10k", 2);
    let config = root.join("tiny.json");
    fs::write(
        &config,
        r#"{"network.conv_channels": 2, "network.fc_neurons": 12, "network.timesteps": 8,
            "network.n_batch": 8, "network.t_batch": 4, "fc_epochs": 1}"#,
    )
    .unwrap();
    Fixture { _tmp: tmp, root, config }
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn train(f: &Fixture, out: &str) -> Output {
    run(bin()
        .arg("train")
        .arg("--config")
        .arg(&f.config)
        .arg("--data-dir")
        .arg(f.root.join("data"))
        .arg("--out")
        .arg(f.root.join(out)))
}

#[test]
fn train_writes_artifacts_and_eval_reproduces_them() {
    let f = fixture();
    let out = train(&f, "run");
    assert_eq!(out.status.code(), Some(0));
    let dir = f.root.join("run");
    for name in ["checkpoint.bin", "epochs.csv", "metrics.csv", "confusion.csv", "summary.json"] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let acc = summary["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(summary["test_samples"], 20);
    let epochs = fs::read_to_string(dir.join("epochs.csv")).unwrap();
    assert_eq!(epochs.lines().count(), 3, "header, one conv and one fc epoch:\n{epochs}");

    let eval = run(bin()
        .arg("eval")
        .arg("--checkpoint")
        .arg(dir.join("checkpoint.bin"))
        .arg("--config")
        .arg(&f.config)
        .arg("--data-dir")
        .arg(f.root.join("data"))
        .arg("--out")
        .arg(f.root.join("eval")));
    assert_eq!(eval.status.code(), Some(0));
    let e: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.root.join("eval/eval.json")).unwrap()).unwrap();
    assert_eq!(e["metrics"]["accuracy"].as_f64().unwrap(), acc);

    let export = run(bin()
        .arg("export-weights")
        .arg("--checkpoint")
        .arg(dir.join("checkpoint.bin"))
        .arg("--out")
        .arg(f.root.join("weights")));
    assert_eq!(export.status.code(), Some(0));
    for name in ["conv_kernels.pgm", "fc_weights.pgm"] {
        let bytes = fs::read(f.root.join("weights").join(name)).unwrap();
        assert!(bytes.starts_with(b"P5\n"), "{name}");
    }
    let assignments = fs::read_to_string(f.root.join("weights/assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 13);
}

#[test]
fn eval_rejects_a_checkpoint_from_another_configuration() {
    let f = fixture();
    assert_eq!(train(&f, "run").status.code(), Some(0));
    let other = f.root.join("other.json");
    fs::write(&other, r#"{"network.conv_channels": 2, "network.fc_neurons": 12, "network.timesteps": 9}"#).unwrap();
    let out = run(bin()
        .arg("eval")
        .arg("--checkpoint")
        .arg(f.root.join("run/checkpoint.bin"))
        .arg("--config")
        .arg(&other)
        .arg("--data-dir")
        .arg(f.root.join("data"))
        .arg("--out")
        .arg(f.root.join("eval")));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_2() {
    let f = fixture();
    let bad = f.root.join("bad.json");
    fs::write(&bad, r#"{"network.timestep": 10}"#).unwrap();
    let out = run(bin().arg("train").arg("--config").arg(&bad).arg("--data-dir").arg(f.root.join("data")));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("network.timestep"));
}

#[test]
fn invalid_values_exit_with_2() {
    let f = fixture();
    let bad = f.root.join("bad.json");
    fs::write(&bad, r#"{"network.mechanisms.atb": false}"#).unwrap();
    let out = run(bin().arg("train").arg("--config").arg(&bad).arg("--data-dir").arg(f.root.join("data")));
    assert_eq!(out.status.code(), Some(2));
    let out = run(bin().arg("train").arg("--dataset").arg("svhn"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_exits_with_1() {
    let f = fixture();
    let out = run(bin()
        .arg("train")
        .arg("--config")
        .arg(&f.config)
        .arg("--data-dir")
        .arg(f.root.join("nowhere"))
        .arg("--out")
        .arg(f.root.join("run")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn small_sample_and_ablation_runs() {
    let f = fixture();
    let out = run(bin()
        .arg("small-sample")
        .arg("--seeds")
        .arg("0,1")
        .arg("--per-class")
        .arg("2")
        .arg("--config")
        .arg(&f.config)
        .arg("--data-dir")
        .arg(f.root.join("data"))
        .arg("--out")
        .arg(f.root.join("small")));
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(f.root.join("small/small_sample.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(f.root.join("small/seed-1/checkpoint.bin").exists());

    let out = run(bin()
        .arg("ablate")
        .arg("--set")
        .arg("none")
        .arg("--set")
        .arg("asf+alic")
        .arg("--seeds")
        .arg("0")
        .arg("--per-class")
        .arg("2")
        .arg("--config")
        .arg(&f.config)
        .arg("--data-dir")
        .arg(f.root.join("data"))
        .arg("--out")
        .arg(f.root.join("ablate")));
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(f.root.join("ablate/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.contains("no-asf-alic"));

    let out = run(bin().arg("ablate").arg("--set").arg("dropout").arg("--data-dir").arg(f.root.join("data")));
    assert_eq!(out.status.code(), Some(2));
}
