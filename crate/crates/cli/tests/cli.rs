//! Error-path checks for the binary itself.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quorumprobe"))
}

#[test]
fn run_requires_a_repo() {
    let out = bin().args(["run", "--budget-hours", "1"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "got: {stderr}");
    assert!(stderr.contains("--repo"));
}

#[test]
fn locked_state_dir_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state");
    fs::create_dir_all(&state).unwrap();
    fs::write(state.join(".lock"), "").unwrap();
    let out = bin()
        .args(["run", "--repo"])
        .arg(dir.path())
        .args(["--scenario-limit", "1", "--budget-hours", "0", "--backend", "live"])
        .arg("--state-dir")
        .arg(&state)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("locked"));
}

#[test]
fn replay_rejects_a_corrupt_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    fs::write(&log, "{\"iteration\":1,\"step\":9,\"agent\":\"strategy\",\"summary\":\"x\"}\n").unwrap();
    let out = bin().arg("replay").arg(&log).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 9"));
}

#[test]
fn triage_mark_validates_its_argument() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["triage", "--out"])
        .arg(dir.path())
        .args(["--mark", "slug-without-value"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SLUG=true|false"));
}
