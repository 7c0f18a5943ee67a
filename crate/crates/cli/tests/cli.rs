use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dml_core::simlab::dgp::dgp_sample;
use dml_core::simlab::table::{read_csv, write_csv};
use dml_core::simlab::CoverageCell;
use serde_json::Value;

fn dml(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dml")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_data(dir: &Path, n: usize) {
    let mut buf = Vec::new();
    dgp_sample(n, 17).write_csv(&mut buf).unwrap();
    fs::write(dir.join("sample.csv"), buf).unwrap();
}

const ESTIMATE: &str = r#"
command = "estimate"
seed = 4
output = "out"

[data]
path = "sample.csv"
columns = { y = "y", d = "d", v = "v", x = ["x1", "x2", "x3"] }

[functional]
kind = "cate"
point = 0.0
"#;

fn without_wall_time(mut v: Value) -> Value {
    v["manifest"].as_object_mut().unwrap().remove("wall_time_seconds");
    v
}

#[test]
fn estimate_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), 400);
    fs::write(dir.path().join("run.toml"), ESTIMATE).unwrap();

    let first = dml(&["estimate", "-c", "run.toml"], dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/estimate.json")).unwrap()).unwrap();
    let res = &json["result"];
    let (theta, lo, hi) = (res["theta"].as_f64().unwrap(), res["ci"][0].as_f64().unwrap(), res["ci"][1].as_f64().unwrap());
    assert!(((hi - theta) - (theta - lo)).abs() < 1e-12);
    assert_eq!(json["manifest"]["seed"], 4);
    assert!(json["manifest"]["version"].as_str().unwrap().contains('+'));

    let csv = fs::read_to_string(dir.path().join("out/estimate.csv")).unwrap();
    assert!(csv.starts_with("kind,point,n,theta,sigma,se,level,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 2);

    let again = dml(&["estimate", "-c", "run.toml", "-o", "out2"], dir.path());
    assert!(again.status.success());
    let second: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out2/estimate.json")).unwrap()).unwrap();
    let (mut a, mut b) = (without_wall_time(json.clone()), without_wall_time(second));
    a["manifest"]["config"]["output"] = Value::Null;
    b["manifest"]["config"]["output"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn malformed_row_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), 50);
    let path = dir.path().join("sample.csv");
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(str::to_string).collect();
    lines[7] = "0.1,1,abc,1,1,1".to_string();
    fs::write(&path, lines.join("\n")).unwrap();
    fs::write(dir.path().join("run.toml"), ESTIMATE).unwrap();

    let out = dml(&["estimate", "-c", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert!(err["error"]["kind"].is_string());
    assert_eq!(err["error"]["row"], 7);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "bandwith = 0.3\n").unwrap();
    let out = dml(&["bounds", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwith"));
}

#[test]
fn bounds_vanish_with_exact_nuisances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
        [bounds]
        q_bar = 1.0
        q = 1.0
        sigma_bar = 0.5
        alpha_bar = 4.0
        epsilon = 0.05
        folds = 5
        n = 1000
        r_gamma = 0.0
        r_alpha = 0.0
        sigma = 1.0
        kappa = 1.0
    "#;
    fs::write(dir.path().join("b.toml"), cfg).unwrap();
    let out = dml(&["bounds", "-c", "b.toml", "-o", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("res/bounds.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["delta_basic"], 0.0);
    assert_eq!(json["report"]["delta_refined"], 0.0);
    let be = 0.4748 / 1000f64.sqrt();
    assert!((json["report"]["berry_esseen"].as_f64().unwrap() - be).abs() < 1e-15);
}

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dml(&["simulate", "--replications", "2", "--learner", "lasso", "--regime", "low", "--seed", "3", "-o", "sim"], dir.path());
    assert!(out.status.code() == Some(0) || out.status.code() == Some(3));
    let cells = read_csv(fs::File::open(dir.path().join("sim/coverage_low_lasso.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 9);
    assert!(cells.iter().all(|c| c.replications == 2));
    assert!(dir.path().join("sim/coverage_low_lasso.md").exists());
    assert!(dir.path().join("sim/manifest_low_lasso.json").exists());
}

fn fixture_cell(v: f64, c_h: f64) -> CoverageCell {
    CoverageCell {
        v,
        cate: 0.0,
        c_h,
        replications: 10,
        completed: 10,
        failures: 0,
        ave_est: v,
        ave_se: 0.1,
        sd_est: 0.1,
        cov80: 0.8,
        cov95: 0.9,
        mcse80: 0.12,
        mcse95: 0.09,
        flagged: false,
    }
}

#[test]
fn report_collates_tables_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let stems = ["high_lasso", "low_forest", "high_mlp", "low_lasso", "high_forest", "low_mlp"];
    for (k, stem) in stems.iter().enumerate() {
        let mut buf = Vec::new();
        write_csv(&[fixture_cell(k as f64 / 10.0, 0.5)], &mut buf).unwrap();
        fs::write(dir.path().join(format!("coverage_{stem}.csv")), buf).unwrap();
    }
    let out = dml(&["report", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = fs::read_to_string(dir.path().join("report.md")).unwrap();
    let headings: Vec<&str> = doc.lines().filter(|l| l.starts_with("## ")).collect();
    assert_eq!(
        headings,
        [
            "## Table 1. Low dimensional coverage simulation with neural network",
            "## Table 2. Low dimensional coverage simulation with random forest",
            "## Table 3. Low dimensional coverage simulation with lasso",
            "## Table 4. High dimensional coverage simulation with neural network",
            "## Table 5. High dimensional coverage simulation with random forest",
            "## Table 6. High dimensional coverage simulation with lasso",
        ]
    );
    assert_eq!(dml(&["report", "."], dir.path()).stdout, out.stdout);
}

#[test]
fn report_without_tables_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dml(&["report", "."], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
