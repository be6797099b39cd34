//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_calorinet"));
    // Tests control seeding explicitly; never inherit one from the session.
    cmd.env_remove("CALORINET_SEED");
    cmd
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_across_runs() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = bin()
            .args(["synth", "--preset", "split-info", "--seed", "7", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb, "same seed must produce byte-identical datasets");
}

#[test]
fn synth_rejects_zero_subjects_with_usage_exit() {
    let dir = tempdir().unwrap();
    let status = bin()
        .args(["synth", "--subjects", "0", "--seed", "1", "--out"])
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempdir().unwrap();
    let status = bin()
        .args(["synth", "--out"])
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("env");
    let status = bin()
        .env("CALORINET_SEED", "7")
        .args(["synth", "--preset", "split-info", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let explicit = dir.path().join("flag");
    let status = bin()
        .args(["synth", "--preset", "split-info", "--seed", "7", "--out"])
        .arg(&explicit)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read_tree(&out), read_tree(&explicit));
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let status = bin().args(["eval", "--no-such-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn train_predict_and_mets_eval_round_trip() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data");
    let status = bin()
        .args(["synth", "--preset", "split-info", "--seed", "11", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());

    // Two identical training runs must produce byte-identical artifacts.
    let (run_a, run_b) = (dir.path().join("run_a"), dir.path().join("run_b"));
    for out in [&run_a, &run_b] {
        let status = bin()
            .args([
                "train",
                "--variant",
                "AccuCalNet",
                "--seed",
                "3",
                "--epochs",
                "1",
                "--buffer",
                "40",
                "--scales",
                "2",
                "--data",
            ])
            .arg(&data)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let ckpt_a = std::fs::read(run_a.join("checkpoint.json")).unwrap();
    assert_eq!(ckpt_a, std::fs::read(run_b.join("checkpoint.json")).unwrap());
    assert_eq!(
        std::fs::read(run_a.join("history.csv")).unwrap(),
        std::fs::read(run_b.join("history.csv")).unwrap()
    );
    let history = std::fs::read_to_string(run_a.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss"));

    // Streaming prediction over one recorded session.
    let predictions = dir.path().join("pred.csv");
    let output = bin()
        .args(["predict", "--checkpoint"])
        .arg(run_a.join("checkpoint.json"))
        .arg("--session")
        .arg(data.join("subject01").join("session01"))
        .arg("--out")
        .arg(&predictions)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let pred_text = std::fs::read_to_string(&predictions).unwrap();
    let mut lines = pred_text.lines();
    assert_eq!(lines.next(), Some("frame,kcal_per_min"));
    let mut count = 0;
    for line in lines {
        let (frame, value) = line.split_once(',').unwrap();
        frame.parse::<u64>().unwrap();
        assert!(value.parse::<f64>().unwrap().is_finite());
        count += 1;
    }
    assert!(count > 100, "expected a prediction per stride tick, got {count}");

    // METs baseline needs no training and no seed.
    let mets_out = dir.path().join("mets");
    let status = bin()
        .args(["eval", "--variant", "mets", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&mets_out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(mets_out.join("report.csv")).unwrap();
    assert!(report.starts_with("activity,rmse"));
    assert!(report.lines().any(|l| l.starts_with("overall,")));
    let preds = std::fs::read_to_string(mets_out.join("predictions_subject01.csv")).unwrap();
    assert!(preds.starts_with("frame,ground_truth,pred_mets"));
}

#[test]
fn config_file_drives_training_and_flags_override() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(bin()
        .args(["synth", "--preset", "split-info", "--seed", "5", "--out"])
        .arg(&data)
        .status()
        .unwrap()
        .success());

    let config = dir.path().join("exp.cfg");
    std::fs::write(
        &config,
        format!(
            "data = {}\nvariant = AccuCalNet\nseed = 3\nepochs = 1\nbuffer = 40\nscales = 2\n",
            data.display()
        ),
    )
    .unwrap();

    let from_config = dir.path().join("from_config");
    assert!(bin()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&from_config)
        .status()
        .unwrap()
        .success());

    // Same settings spelled as flags must give the same checkpoint.
    let from_flags = dir.path().join("from_flags");
    assert!(bin()
        .args([
            "train",
            "--variant",
            "AccuCalNet",
            "--seed",
            "3",
            "--epochs",
            "1",
            "--buffer",
            "40",
            "--scales",
            "2",
            "--data",
        ])
        .arg(&data)
        .arg("--out")
        .arg(&from_flags)
        .status()
        .unwrap()
        .success());
    assert_eq!(
        std::fs::read(from_config.join("checkpoint.json")).unwrap(),
        std::fs::read(from_flags.join("checkpoint.json")).unwrap()
    );

    // A flag overriding the config changes the outcome.
    let overridden = dir.path().join("overridden");
    assert!(bin()
        .args(["train", "--seed", "4", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&overridden)
        .status()
        .unwrap()
        .success());
    assert_ne!(
        std::fs::read(from_config.join("checkpoint.json")).unwrap(),
        std::fs::read(overridden.join("checkpoint.json")).unwrap()
    );
}
