use std::process::Command;

fn cemwave() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cemwave"))
}

#[test]
fn sweep_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let status = cemwave()
        .args([
            "sweep",
            "--n-fine",
            "16",
            "--n-coarse",
            "4",
            "-J",
            "2",
            "-l",
            "1",
        ])
        .args([
            "--tau",
            "5e-5",
            "--t-end",
            "0.005",
            "--snapshot-times",
            "0.005",
        ])
        .args(["--contrast", "100", "-o"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("config.resolved.toml").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let out = cemwave()
        .args(["run", "--n-fine", "16", "--n-coarse", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_coarse"));
}

#[test]
fn missing_config_file_exits_with_three() {
    let out = cemwave()
        .args(["run", "/nonexistent/cfg.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unstable_step_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = cemwave()
        .args([
            "run",
            "--n-fine",
            "16",
            "--n-coarse",
            "4",
            "-J",
            "2",
            "-l",
            "1",
        ])
        .args([
            "--tau",
            "0.005",
            "--t-end",
            "0.01",
            "--snapshot-times",
            "0.01",
            "-o",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stability"));
}
