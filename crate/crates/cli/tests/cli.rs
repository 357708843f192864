use std::path::Path;
use std::process::{Command, Output};

fn wtlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtlab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run wtlab")
}

fn summary(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("summary JSON on stdout")
}

#[test]
fn missing_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtlab(&["coeffs", "--config", "does-not-exist.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn config_or_preset_is_required() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wtlab(&["profile"], dir.path()).status.code(), Some(2));
    let out = wtlab(
        &["profile", "--preset", "rgl-default", "--override", "solver.dt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtlab(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "rgl-default",
        "rgl-eckhaus-unstable",
        "brusselator-default",
        "toy-default",
        "burgers-meanzero",
    ] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}

#[test]
fn coeffs_on_default_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtlab(&["coeffs", "--preset", "rgl-default", "--out", "c"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!(s["summary"]["checks"]["d_positive"].as_bool().unwrap());
    for f in ["coefficients.json", "meta.json", "config.json"] {
        assert!(dir.path().join("c").join(f).exists(), "{f}");
    }
}

#[test]
fn eckhaus_unstable_spectrum_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtlab(
        &["spectrum", "--preset", "rgl-eckhaus-unstable", "--out", "s"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let s = summary(&out);
    assert_eq!(s["summary"]["d2_ok"], serde_json::Value::Bool(false));
    assert!(dir.path().join("s/spectrum.json").exists());
}

#[test]
fn short_simulation_can_be_reanalysed() {
    let dir = tempfile::tempdir().unwrap();
    let shrink = [
        "--override",
        "solver.periods=64",
        "--override",
        "solver.t_final=40",
        "--override",
        "initial.gamma0.delta=0.0625",
        "--override",
        "initial.gamma0.amplitude=0.25",
        "--override",
        "analysis.verify.window=[2,38]",
    ];
    let mut args = vec!["simulate", "--preset", "rgl-default", "--out", "run"];
    args.extend(shrink);
    let out = wtlab(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/state_000000.f64").exists());
    assert!(dir.path().join("run/norms.csv").exists());

    let out = wtlab(&["analyze", "--run", "run"], dir.path());
    // The window is far too short for the rate criteria; only the plumbing is under test.
    assert!(
        matches!(out.status.code(), Some(0) | Some(1)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["residuals.csv", "modulation.csv", "report.json"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    assert_eq!(
        wtlab(&["analyze", "--run", "nowhere"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn burgers_prediction_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = wtlab(&["predict", "--preset", "burgers-meanzero", "--out", "p"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert!(s["summary"]["k_ratio"].as_f64().unwrap() < 1e-2);
    assert!(dir.path().join("p/norms.csv").exists());
}
