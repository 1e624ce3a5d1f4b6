use std::path::Path;
use std::process::{Command, Output};

use thermoproc_cli::output::verify_manifest;

fn thermoproc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoproc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn thermoproc_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoproc"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const FIG3: &str = r#"{"schema_version": 1, "experiment": {"fig3": {"gamma": 0.7, "depth": 4}}}"#;

#[test]
fn run_writes_outputs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", FIG3);
    let out = tmp.path().join("out");
    let o = thermoproc(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["fig3_regions.csv", "fig3_separation.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(verify_manifest(&out).unwrap().is_empty());
    let v = thermoproc(&["verify", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));

    std::fs::write(out.join("fig3_regions.csv"), "tampered").unwrap();
    let v = thermoproc(&["verify", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(3));
}

#[test]
fn bad_config_exits_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"schema_version": 1, "experiment": {"fig3": {"gamma": 0.3}}}"#,
    );
    let o = thermoproc(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let cfg = write(tmp.path(), "d.json", r#"{"schema_version": 1, "experiment": {"fig9": {}}}"#);
    assert_eq!(thermoproc(&["run", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_4() {
    assert_eq!(thermoproc(&["run", "/nonexistent/config.json"]).status.code(), Some(4));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", FIG3);
    let blocker = write(tmp.path(), "file", "x");
    let out = format!("{blocker}/sub");
    assert_eq!(thermoproc(&["run", &cfg, "--out", &out]).status.code(), Some(4));
}

#[test]
fn zero_tolerance_exits_3() {
    let o = thermoproc(&["validate", "--only", "memory", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(3));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn validate_single_module() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("r.json");
    let o = thermoproc(&["validate", "--only", "combinatorics", "--json", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let full: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    let checks = full["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["module"] == "combinatorics"));
}

#[test]
fn unknown_module_is_rejected() {
    assert_eq!(thermoproc(&["validate", "--only", "nope"]).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"schema_version": 1, "experiment": {"beta-swap-sweep": {"gamma": [0.6, 0.8], "p0": [0.1], "d_max": 6}}}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = thermoproc_env(&["run", &cfg, "--out", out.to_str().unwrap()], "THERMOPROC_THREADS", threads);
        assert!(o.status.success());
        outputs.push(std::fs::read(out.join("beta_swap_sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let o = thermoproc_env(&["run", &cfg], "THERMOPROC_THREADS", "zero");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig_subcommand_uses_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f2");
    let o = thermoproc(&["fig", "fig2", "--points", "5", "--d", "1,3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("fig2.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "W,eps_tp,eps_etp,eps_mtp,eps_d1,eps_d3");
    assert_eq!(rows.len(), 6);
}
