use std::path::Path;
use std::process::{Command, Output};

fn phi4(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phi4")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn version_exits_zero() {
    let out = phi4(&["version"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        format!("phi4 {}", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(phi4(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        phi4(&["simulate", "--config", "/no/such/file.cfg"]).status.code(),
        Some(2)
    );
    assert_eq!(phi4(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.n = 12\n");
    let out = phi4(&["harness", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n"));
    let cfg = write_config(dir.path(), "grid.q = 1\n");
    assert_eq!(phi4(&["simulate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn harness_writes_report_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.d = 1\ngrid.n = 32\ntime.dt = 1e-4\ntime.horizon = 0.05\n",
    );
    for exp in ["ode_reference", "energy_balance"] {
        let out_dir = dir.path().join(exp);
        let out = phi4(&[
            "harness",
            "--config",
            &cfg,
            "--experiment",
            exp,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
        assert!(report.starts_with("# phi4 csv v1 "));
        let verdict = std::fs::read_to_string(out_dir.join("verdict.txt")).unwrap();
        assert!(verdict.contains("PASS"));
    }
}

#[test]
fn failing_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // too coarse a step for the ODE reference tolerance
    let cfg = write_config(
        dir.path(),
        "grid.d = 1\ngrid.n = 8\ntime.dt = 0.1\ntime.horizon = 0.5\nexperiment.tag = ode_reference\n",
    );
    let out = phi4(&[
        "harness",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "grid.d = 2\ngrid.n = 8\ntime.dt = 1e-3\ntime.horizon = 0.01\ntime.snapshot_every = 5\n",
    );
    let out_dir = dir.path().join("sim");
    let out = phi4(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join("trajectory_0.csv").exists());
    assert!(out_dir.join("x_0_10.bin").exists());

    let out = phi4(&["gronwall", "--sigma", "0.5", "--s", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("# phi4 csv v1 sigma,s,log_series,asymptotic_rate,relative_error"));
    assert_eq!(text.lines().count(), 3);
}
