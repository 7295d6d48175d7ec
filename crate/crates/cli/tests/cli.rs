use std::path::Path;
use std::process::{Command, Output};

fn hypertrack(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypertrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn single_frame_echoes_the_initial_box() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), r#"{"frames": 1}"#).unwrap();
    assert!(
        hypertrack(dir.path(), &["synth", "--spec", "spec.json", "--out", "s.jsonl"])
            .status
            .success()
    );
    assert!(hypertrack(dir.path(), &["track", "--seq", "s.jsonl", "--out", "r.csv"])
        .status
        .success());

    let seq = std::fs::read_to_string(dir.path().join("s.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(seq.lines().next().unwrap()).unwrap();
    let init = header["init_box"].as_array().unwrap();
    let results = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines[0], "frame,cx,cy,w,h,score,n_reliable");
    assert_eq!(lines.len(), 2);
    let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    for (i, v) in init.iter().enumerate() {
        assert_eq!(row[i + 1], v.as_f64().unwrap());
    }
    assert_eq!(row[6], 0.0);
}

#[test]
fn missing_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypertrack(dir.path(), &["track", "--seq", "absent.jsonl", "--out", "r.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), r#"{"frames": 2}"#).unwrap();
    std::fs::write(dir.path().join("config.json"), r#"{"order": 4}"#).unwrap();
    assert!(
        hypertrack(dir.path(), &["synth", "--spec", "spec.json", "--out", "s.jsonl"])
            .status
            .success()
    );
    let out = hypertrack(
        dir.path(),
        &["track", "--seq", "s.jsonl", "--config", "config.json", "--out", "r.csv"],
    );
    assert!(!out.status.success());
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn plot_needs_inputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!hypertrack(dir.path(), &["plot", "--out", "p.svg"]).status.success());
}
