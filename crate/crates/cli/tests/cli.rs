use std::path::Path;
use std::process::Command;

use moyal_heat::evolve::SweepRecord;
use moyal_heat_cli::manifest::{sha256_hex, RunManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moyal-heat"))
}

fn run_with(cmd: &str, toml: &str, dir: &Path, envs: &[(&str, &str)]) -> i32 {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, toml).unwrap();
    let out = bin()
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .envs(envs.iter().copied())
        .output()
        .unwrap();
    out.status.code().unwrap()
}

fn manifest(dir: &Path, cmd: &str) -> RunManifest {
    serde_json::from_slice(&std::fs::read(dir.join("out").join(format!("{cmd}.manifest.json"))).unwrap()).unwrap()
}

#[test]
fn corrupted_phi_exits_nonzero_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_with("verify-doi", "corrupt_phi = true\ndoi_p = [3.0]\ndoi_q = [2.0]\ndoi_trials = 12\n", dir.path(), &[]);
    assert_eq!(code, 2);
    let m = manifest(dir.path(), "verify-doi");
    let ce = m.outputs.iter().find(|o| o.path.contains("doi_counterexample")).expect("counterexample path");
    let text = std::fs::read_to_string(&ce.path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["ratio"].as_f64().unwrap() > v["c_p"].as_f64().unwrap());
}

#[test]
fn zero_trials_is_an_empty_success() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with("verify-doi", "doi_trials = 0\n", dir.path(), &[]), 0);
    let report = std::fs::read_to_string(dir.path().join("out/verify_doi.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 0);
}

#[test]
fn default_doi_report_has_closed_form_constants() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with("verify-doi", "doi_p = [2.0, 3.0]\ndoi_q = [2.0]\ndoi_trials = 20\n", dir.path(), &[]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/verify_doi.json")).unwrap()).unwrap();
    let e = v["entries"].as_array().unwrap();
    assert_eq!(e[0]["c_p"].as_f64().unwrap(), 1.0);
    assert!((e[1]["c_p"].as_f64().unwrap() - (1.0 + std::f64::consts::PI)).abs() < 1e-3);
}

#[test]
fn empty_amplitude_grid_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_with("fujita-sweep", "model = \"classical-d1\"\namplitude_grid = []\n", dir.path(), &[]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("out/fujita_sweep.csv")).unwrap();
    assert_eq!(csv, format!("{}\n", SweepRecord::header(true).join(",")));
}

#[test]
fn config_errors_are_infrastructure_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with("heat-check", "n_typo = 3\n", dir.path(), &[]), 3);
    assert_eq!(run_with("heat-check", "n = \"many\"\n", dir.path(), &[]), 3);
    assert_eq!(run_with("verify-doi", "", dir.path(), &[("NC_HEAT_THREADS", "lots")]), 3);
}

#[test]
fn tiny_truncation_fails_heat_check() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with("heat-check", "n = 4\nn_pad = 8\n", dir.path(), &[]), 2);
    let m = manifest(dir.path(), "heat-check");
    assert!(m.failures() > 0);
}

#[test]
fn zero_times_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "heat_trace_t = [0.0, 0.5]\nflow_t = [0.0, 0.1]\ngaussian_t = [0.25]\njensen_heat_t = [0.0, 0.1]\n";
    assert_eq!(run_with("heat-check", cfg, dir.path(), &[]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/heat_check.json")).unwrap()).unwrap();
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"trace[t=0.5]"));
    assert!(!names.iter().any(|n| n.contains("t=0]") || n.contains("t=0,")));
}

#[test]
fn sweep_is_deterministic_and_hashed() {
    let cfg = "model = \"classical-d1\"\np_grid = [2.0, 3.5]\namplitude_grid = [0.1, 1.0]\nhorizon = 20.0\nbox_n = 512\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_with("fujita-sweep", cfg, a.path(), &[]), 0);
    assert_eq!(run_with("fujita-sweep", cfg, b.path(), &[("NC_HEAT_THREADS", "1")]), 0);
    let ca = std::fs::read(a.path().join("out/fujita_sweep.csv")).unwrap();
    let cb = std::fs::read(b.path().join("out/fujita_sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let m = manifest(a.path(), "fujita-sweep");
    assert_eq!(m.outputs.len(), 2);
    for o in &m.outputs {
        assert_eq!(o.sha256, sha256_hex(&std::fs::read(&o.path).unwrap()));
    }
    assert!(m.finished >= m.started);
    assert!(m.config.contains("p_grid = [2.0, 3.5]"));
}

#[test]
fn certify_reports_margins() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = \"classical-d1\"\ncertify_p = 1.5\ncertify_amplitude = 1.0\nhorizon = 100.0\nbox_n = 512\n";
    assert_eq!(run_with("certify", cfg, dir.path(), &[]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/certify.json")).unwrap()).unwrap();
    assert_eq!(v["certificate"]["threshold"].as_f64().unwrap(), 4.0);
    // mass 1 in d = 1: t²·(4πt)^{−1/2} passes 4 well before t = 100
    assert!(v["certificate"]["margin"].as_f64().unwrap() > 0.0);
    assert!(!v["certificate"]["advisory"].as_bool().unwrap());
}

#[test]
fn certify_flags_advisory_matrix_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "certify_p = 3.0\ncertify_amplitude = 0.01\nhorizon = 5.0\nradial_dim = 256\n";
    assert_eq!(run_with("certify", cfg, dir.path(), &[]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/certify.json")).unwrap()).unwrap();
    assert!(v["certificate"]["advisory"].as_bool().unwrap());
    assert_eq!(v["monitors"].as_array().unwrap().len(), 3);
}
