//! CLI tests against the compiled binary.

use std::process::Command;

fn hemocomm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hemocomm"))
}

fn write_tiny_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        r#"
[simulation]
duration_us = 1000.0
threads = 1
seed = 9

[species.platelet]
concentration_per_mm3 = 0.0

[species.wbc]
concentration_per_mm3 = 0.0

[species.rbc]
concentration_per_mm3 = 0.0

[encoder]
burst_size = 20
"#,
    )
    .unwrap();
    path
}

#[test]
fn impulse_run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = hemocomm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--experiment",
            "impulse",
            "--seed",
            "3",
            "--threads",
            "1",
            "--deterministic",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    for file in ["reception_map.csv", "events.csv", "config.toml", "manifest.txt"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 3"));
    assert!(manifest.contains("[reference_design]"));
}

#[test]
fn duration_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = hemocomm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--experiment",
            "impulse",
            "--duration-us",
            "500",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let snapshot = std::fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert!(snapshot.contains("duration_us = 500"));
}

#[test]
fn bad_experiment_name_fails_with_diagnostic() {
    let output = hemocomm().args(["--experiment", "warp"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("unknown experiment"), "{stderr}");
}

#[test]
fn missing_config_file_fails_with_path() {
    let output = hemocomm()
        .args(["--experiment", "impulse", "--config", "/nonexistent/conf.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/conf.toml"), "{stderr}");
}

#[test]
fn frame_run_reports_decoding() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let output = hemocomm()
        .args([
            "--config",
            config.to_str().unwrap(),
            "--experiment",
            "frame",
            "--bits",
            "10",
            "--output-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(out_dir.join("frames.csv").exists());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("bits = 10"));
}

#[test]
fn validate_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let output = hemocomm()
        .args(["validate", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("radius_um = 30.0"));
    assert!(stdout.contains("burst_size = 20"));
}
