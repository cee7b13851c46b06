use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_infidelay"));
    cmd.env_remove("INFIDELAY_OUT");
    cmd
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(path: &Path, out: &Path) -> (i32, String, String) {
    let o = bin().arg("run").arg(path).arg("--out").arg(out).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into(), String::from_utf8_lossy(&o.stderr).into())
}

fn csv_value_at(csv: &str, t: f64) -> f64 {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|row| (row[0] - t).abs() < 1e-12)
        .map(|row| row[1])
        .expect("knot present")
}

#[test]
fn classic_delay_exits_zero_with_pinned_csv() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&bundled("classic-delay.json"), out.path());
    assert_eq!(code, 0, "{stdout}");
    let csv = std::fs::read_to_string(out.path().join("classic-delay/x.csv")).unwrap();
    assert!(csv.starts_with("t,x,xprime\n"));
    assert!(csv_value_at(&csv, 1.0).abs() <= 1e-6);
    assert!((csv_value_at(&csv, 2.0) + 0.5).abs() <= 1e-6);
    assert!(out.path().join("classic-delay/trajectory.json").exists());
}

#[test]
fn harmonic_family_reports_divergence_and_passes() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&bundled("harmonic-divergent.json"), out.path());
    assert_eq!(code, 0);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("harmonic-divergent/report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"][0]["result"]["verdict"]["status"], "divergent");
    assert_eq!(report["pass"], true);
}

#[test]
fn missing_tau_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"name": "bad", "problem": {"a": 0.0, "family": {"kind": "finite-support", "b": [-1.0]}, "history": {"preset": "constant", "value": 1.0}}, "horizon": 1.0, "checks": []}"#,
    )
    .unwrap();
    let (code, _, stderr) = run(&file, &dir.path().join("out"));
    assert_eq!(code, 2);
    assert!(stderr.contains("bad.json:1:") && stderr.contains("tau"), "{stderr}");
}

#[test]
fn failing_check_exits_one_and_keeps_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("wrong.json");
    std::fs::write(
        &file,
        r#"{"name": "wrong", "problem": {"a": 0.0, "family": {"kind": "finite-support", "b": [-1.0], "tau": {"c": 0.0, "delta": 1.0}}, "history": {"preset": "constant", "value": 1.0}}, "horizon": 1.0,
           "checks": [{"check": "solve", "expect": [{"t": 1.0, "x": 0.25, "tol": 1e-6}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, stdout, _) = run(&file, &out);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL wrong"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("wrong/report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn schema_error_outranks_numeric_failure_in_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(bundled("classic-delay.json"), dir.path().join("a.json")).unwrap();
    std::fs::write(dir.path().join("b.json"), "{ \"name\": ").unwrap();
    let (code, _, _) = run(dir.path(), &dir.path().join("out"));
    assert_eq!(code, 2);
    assert!(dir.path().join("out/classic-delay/report.json").exists());
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_out = dir.path().join("from-env");
    let status = bin()
        .env("INFIDELAY_OUT", &env_out)
        .args(["run", bundled("classic-delay.json").to_str().unwrap(), "--out"])
        .arg(dir.path().join("from-flag"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_out.join("classic-delay/x.csv").exists());
    assert!(!dir.path().join("from-flag").exists());
}

#[test]
fn bundled_directory_passes_in_parallel() {
    let out = tempfile::tempdir().unwrap();
    let o = bin().arg("run").arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")).arg("--out").arg(out.path()).args(["--jobs", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn checks_catalog_lists_nine_entries() {
    let o = bin().arg("checks").output().unwrap();
    assert!(o.status.success());
    let catalog: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = catalog.as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 9);
    assert!(names.contains(&"semigroup-law") && names.contains(&"mild-solution"));
}

#[test]
fn version_prints_package_version() {
    let o = bin().arg("version").output().unwrap();
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
