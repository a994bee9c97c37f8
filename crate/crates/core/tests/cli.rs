//! Command-line behaviour: exit codes, missing data, snapshots and reports.

use std::path::Path;
use std::process::{Command, Output};

use hmamp::config::{ExperimentConfig, SNAPSHOT_FILE};

fn hmamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmamp")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hmamp_without_dataset_names_the_missing_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_dataset");
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, format!("dataset = {:?}\n[training]\nepisodes = 1\n", path(&missing))).unwrap();
    let out = hmamp(&[
        "train",
        "--config",
        path(&cfg),
        "--method",
        "hmamp",
        "--out",
        path(&dir.path().join("run")),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_dataset"), "{stderr}");
}

#[test]
fn snapshot_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let out = hmamp(&[
        "train",
        "--method",
        "rl-noamp",
        "--episodes",
        "1",
        "--seed",
        "5",
        "--out",
        path(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snapshot = first.join(SNAPSHOT_FILE);
    let text = std::fs::read_to_string(&snapshot).unwrap();
    let cfg = ExperimentConfig::load(&snapshot).unwrap();
    assert_eq!(cfg.training.seed, 5);
    assert_eq!(cfg.training.episodes, 1);
    assert_eq!(cfg.to_toml().unwrap(), text);

    let second = dir.path().join("b");
    let out = hmamp(&["train", "--config", path(&snapshot), "--out", path(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replay = std::fs::read_to_string(second.join(SNAPSHOT_FILE)).unwrap();
    assert_eq!(
        replay.replace(path(&second), ""),
        text.replace(path(&first), "")
    );
    assert_eq!(
        std::fs::read(first.join("training_log.csv")).unwrap(),
        std::fs::read(second.join("training_log.csv")).unwrap()
    );
}

#[test]
fn planner_eval_writes_one_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmamp(&["eval", "--method", "dppcp", "--episodes", "10", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("DPPCP"), "{report}");
    assert!(dir.path().join("report.txt").exists());
    let episodes = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 11);
}

#[test]
fn gradient_check_exit_codes() {
    let ok = hmamp(&["check-grad", "--trials", "3"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = hmamp(&["check-grad", "--trials", "3", "--corrupt", "nn_backward"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
    let unknown = hmamp(&["check-grad", "--corrupt", "nonsense"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn gen_ref_writes_loadable_clips() {
    let dir = tempfile::tempdir().unwrap();
    let out = hmamp(&["gen-ref", "--out", path(dir.path())]);
    assert!(out.status.success());
    let clips = hmamp::motion::load_dataset(dir.path()).unwrap();
    assert!(!clips.is_empty());
}
