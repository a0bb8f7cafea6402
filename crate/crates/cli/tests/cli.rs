use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spectral-bm")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn eig_interval_matches_pi_squared() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["eig"], &configs().join("eig_interval.json"), tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(tmp.path());
    assert_eq!(r["schema"], "spectral-bm/1");
    let l1 = r["report"]["eigenvalues"][0].as_f64().unwrap();
    assert!((l1 - PI * PI).abs() / (PI * PI) < 1e-4);
    let csv = std::fs::read_to_string(tmp.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,lambda,residual"));
    assert_eq!(csv.lines().count(), 4);
    assert!(tmp.path().join("run_meta.json").exists());
}

#[test]
fn bm_verify_identical_bodies_passes_with_zero_defects() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &["bm-verify"],
        &configs().join("bm_identical.json"),
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path());
    for d in r["report"]["chord_defects"].as_array().unwrap() {
        assert!(d.as_f64().unwrap().abs() < 1e-8);
    }
    let csv = std::fs::read_to_string(tmp.path().join("bm.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("r,lambda1,chord_defect,midpoint_defect")
    );
    // Body paths are resolved and echoed inline.
    assert_eq!(r["config"]["b0"]["kind"], "polytope");
}

#[test]
fn missing_dim_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"body": {"kind": "polytope", "vertices": [[0], [1]]}}"#,
    )
    .unwrap();
    let o = run(&["eig"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dim") && err.contains("body"), "{err}");
}

#[test]
fn unknown_fields_and_wrong_command_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"body": {"dim": 1, "kind": "polytope", "vertices": [[0], [1]]}, "cels": 8}"#,
    )
    .unwrap();
    let o = run(&["eig"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cels"));

    let o = run(
        &["trace"],
        &configs().join("eig_interval.json"),
        &tmp.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("command"));
}

#[test]
fn core_errors_name_module_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"body": {"dim": 1, "kind": "polytope", "vertices": [[0], [1]]}, "a": [[-1]]}"#,
    )
    .unwrap();
    let o = run(&["eig"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("operator") && err.contains("`a`"), "{err}");
}

#[test]
fn pass_flag_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("pl.json");
    std::fs::write(
        &cfg,
        r#"{"grid": {"origin": [-3], "spacing": [0.05], "nodes": [121]},
            "f": {"kind": "gaussian", "center": [0], "precision": [[1]]},
            "g": {"kind": "gaussian", "center": [0], "precision": [[1]]},
            "h": {"kind": "constant", "value": 0}}"#,
    )
    .unwrap();
    let o = run(&["pl-check"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let r = report(&tmp.path().join("out"));
    assert_eq!(r["pass"], false);
    assert_eq!(r["report"]["prekopa_leindler"]["hypothesis_pass"], false);
}

#[test]
fn reruns_and_echoed_configs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("gt_random.json");
    run(&["gt-check", "--seed", "7"], &cfg, &tmp.path().join("a"));
    run(&["gt-check", "--seed", "7"], &cfg, &tmp.path().join("b"));
    let a = std::fs::read(tmp.path().join("a/report.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(r["config"]["seed"], 7);
    let echoed = tmp.path().join("echo.json");
    std::fs::write(&echoed, serde_json::to_vec(&r["config"]).unwrap()).unwrap();
    run(&["gt-check"], &echoed, &tmp.path().join("c"));
    assert_eq!(std::fs::read(tmp.path().join("c/report.json")).unwrap(), a);
}

#[test]
fn shipped_configs_run() {
    for (cmd, file) in [
        ("vol-bm", "vol_bm_triangles.json"),
        ("gauss-bm", "gauss_bm_squares.json"),
        ("pl-check", "pl_intervals.json"),
        ("hardy", "hardy_bump.json"),
        ("trace", "trace_interval.json"),
        ("ultra-probe", "ultra_interval.json"),
        ("groundstate", "groundstate_kolmogorov.json"),
    ] {
        let tmp = tempfile::tempdir().unwrap();
        let o = run(&[cmd], &configs().join(file), tmp.path());
        assert_eq!(
            o.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}
