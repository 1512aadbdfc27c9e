use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn otaform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otaform")).args(args).output().expect("binary runs")
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn short_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fs::read_to_string(config_path("run1.cfg")).unwrap().replace("horizon = 30.0", "horizon = 2.0");
    let path = dir.join("scenario.cfg");
    fs::write(&path, edit(text)).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_trace_samples_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = otaform(&["run", "--config", config_path("run1.cfg").to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    for file in ["trace.csv", "samples.csv", "report.toml"] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let report: toml::Table = toml::from_str(&fs::read_to_string(out_dir.join("report.toml")).unwrap()).unwrap();
    assert_eq!(report["verdict"].as_str(), Some("converged"));
    assert_eq!(report["ledger"]["ota_count"].as_integer(), Some(900));
}

#[test]
fn invalid_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), |t| t.replace("t_min = 0.1", "t_min = 0.2"));
    let out_dir = dir.path().join("out");
    let out = otaform(&["run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule.t_"));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), |t| t.replace("[formation]", "[formation]\ncolour = \"red\""));
    let out = otaform(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_config_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = otaform(&["run", "--config", "/nonexistent/run.cfg", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_override_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), |t| t);
    let dirs = ["a", "b", "c"].map(|d| dir.path().join(d));
    for (d, seed) in dirs.iter().zip(["7", "7", "8"]) {
        let out = otaform(&["run", "--config", config.to_str().unwrap(), "--out", d.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success());
    }
    let read = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
    assert_eq!(fs::read(dirs[0].join("samples.csv")).unwrap(), fs::read(dirs[1].join("samples.csv")).unwrap());
}

#[test]
fn verify_suites_pass() {
    let out = otaform(&["verify", "--suite", "lemma1", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("0 violations"));
    let out = otaform(&["verify", "--suite", "seminorm"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn corrupted_matrices_give_a_counterexample() {
    let out = otaform(&["verify", "--suite", "tau1", "--trials", "50", "--corrupt"]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("violates row-stochastic input"), "{text}");
    assert!(text.contains("(n = 2)"), "{text}");
}

#[test]
fn unknown_suite_is_rejected() {
    let out = otaform(&["verify", "--suite", "spectral"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}
