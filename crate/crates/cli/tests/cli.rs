use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavity-soliton"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn even_grid_size_is_rejected_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        "experiment = \"dispersion\"\n\n[params]\nsigma_p = 0.05\nn_momentum = 200\n",
    )
    .unwrap();
    let out = run(&["--config", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("n_momentum"), "{err}");
    assert!(err.contains("bad.toml:5"), "{err}");
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[params]\nsigma_q = 0.05\n").unwrap();
    let out = run(&["--config", "c.toml", "--experiment", "dispersion"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigma_q"), "{}", stderr(&out));

    let out = run(&["--experiment", "dispersion", "--set", "fig3.chi_pts=3"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("chi_pts"), "{}", stderr(&out));
}

#[test]
fn unknown_experiment_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--experiment", "fig9"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("fig9"));
}

#[test]
fn step_guard_violation_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["--experiment", "dispersion", "--set", "dt=0.5"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("step-size guard"), "{}", stderr(&out));
}

#[test]
fn dispersion_is_flat_at_optimal_coupling() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["--experiment", "dispersion", "--chiN", "-2.0", "--out", "o"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(tmp.path().join("o/dispersion/dispersion.csv")).unwrap();
    assert!(text.starts_with("# code_version:"));
    assert!(text.contains("# params_sha256:"));
    let row = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|r| r[2] == "0.0")
        .expect("p = 0 row");
    let curvature: f64 = row[4].parse().unwrap();
    assert!(curvature.abs() < 1e-9, "curvature {curvature}");
    let m = manifest(&tmp.path().join("o/dispersion"));
    assert_eq!(m["spec"]["params"]["chiN"], -2.0);
    assert_eq!(m["units"]["tau"], std::f64::consts::PI);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "--experiment",
            "dissipation",
            "--set",
            "dissipation.t_final=2",
            "--seed",
            "7",
            "--out",
            out,
        ]
    };
    for out in ["a", "b"] {
        let o = run(&args(out), tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["bloch_balanced.csv", "bloch_unbalanced.csv"] {
        let a = fs::read_to_string(tmp.path().join("a/dissipation").join(f)).unwrap();
        let b = fs::read_to_string(tmp.path().join("b/dissipation").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let (ma, mb) = (
        manifest(&tmp.path().join("a/dissipation")),
        manifest(&tmp.path().join("b/dissipation")),
    );
    assert_eq!(ma["files"], mb["files"]);
    assert_eq!(ma["params_sha256"], mb["params_sha256"]);
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "--experiment",
            "dispersion",
            "--set",
            "theta=1.0",
            "--set",
            "dispersion.chi_values=[-1.0, -2.5]",
            "--out",
            "first",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        &["--config", "first/dispersion/manifest.json", "--out", "second"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let first = manifest(&tmp.path().join("first/dispersion"));
    let second = manifest(&tmp.path().join("second/dispersion"));
    assert_eq!(first["spec"]["params"], second["spec"]["params"]);
    assert_eq!(
        first["spec"]["config"]["dispersion"],
        second["spec"]["config"]["dispersion"]
    );
    assert_eq!(first["params_sha256"], second["params_sha256"]);
    assert_eq!(first["files"], second["files"]);
    assert_eq!(first["files"].as_array().unwrap().len(), 2);
}

#[test]
fn locked_regime_violation_is_only_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "--experiment",
            "dispersion",
            "--set",
            "locked_analytics=true",
            "--set",
            "sigma_p=0.2",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("locked regime"), "{}", stderr(&o));
    assert!(tmp.path().join("o/dispersion/manifest.json").exists());
}

#[test]
fn validate_prints_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &["--experiment", "fig3", "--set", "fig3.chi_points=11", "--validate"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let doc: toml::Table = toml::from_str(&text).unwrap();
    assert_eq!(doc["fig3"]["chi_points"].as_integer(), Some(11));
    assert_eq!(doc["experiment"].as_str(), Some("fig3"));
    assert!(!tmp.path().join("results").exists());
}
