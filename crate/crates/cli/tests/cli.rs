use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const PLAIN: &str = r#"
seed = 5
trials = 1000

[model]
beta = 0.0
x0 = 0.3

[[symbol]]
order = 1.0
coefficient = "1 + 0.5*sin(x)"
h = [-1.0, 1.0]

[[symbol]]
order = -1.0
coefficient = "0.5"

[variance_scaling]
grid = [4.0, 8.0, 16.0, 32.0]

[rate]
grid = [2.0, 4.0, 8.0, 16.0]
epsilon = [0.1]
delta = [0.1]

[rate.trajectory]
ns = []
"#;

fn psdo(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_psdo"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--quiet")
        .output()
        .unwrap()
}

#[test]
fn non_decreasing_orders_exit_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = PLAIN.replace("order = -1.0", "order = 1.5");
    let out = psdo(dir.path(), &bad, &["variance-scaling", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("strictly decreasing"), "{err}");
    assert!(err.contains("symbols"), "{err}");
}

#[test]
fn missing_table_and_unknown_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = psdo(dir.path(), PLAIN, &["recover", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[recover]"));
    let out = psdo(dir.path(), PLAIN, &["frobnicate"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn unreachable_certificate_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PLAIN.replace("epsilon = [0.1]", "epsilon = [1e-9]");
    let out = psdo(dir.path(), &cfg, &["rate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stats_harness"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (i, workers) in ["1", "1", "4"].iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let out = psdo(
            dir.path(),
            PLAIN,
            &["variance-scaling", "--out", out_dir.to_str().unwrap(), "--workers", workers],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(fs::read(out_dir.join("variance_scaling.csv")).unwrap());
        assert!(out_dir.join("variance_scaling_manifest.json").exists());
        assert!(out_dir.join("plot_variance.dat").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn seed_and_trials_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    psdo(dir.path(), PLAIN, &["variance-scaling", "--out", a.to_str().unwrap()]);
    let out = psdo(
        dir.path(),
        PLAIN,
        &["variance-scaling", "--out", b.to_str().unwrap(), "--seed", "99", "--trials", "1200"],
    );
    assert!(out.status.success());
    assert_ne!(
        fs::read(a.join("variance_scaling.csv")).unwrap(),
        fs::read(b.join("variance_scaling.csv")).unwrap()
    );
    let manifest = fs::read_to_string(b.join("variance_scaling_manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 99") && manifest.contains("\"trials\": 1200"));
}

#[test]
fn empty_trajectory_warns_and_writes_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = psdo(dir.path(), PLAIN, &["rate", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(!dir.path().join("plot_trajectory.dat").exists());
    assert!(dir.path().join("rate.csv").exists());
}
