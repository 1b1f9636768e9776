use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wext_core::io::{read_field, read_trace, write_field, write_trace};
use wext_core::{GridMeta, HalfSpaceField, TraceField};

fn wext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wext")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

fn square(n: usize, half: f64) -> GridMeta {
    GridMeta::with_origin(&[n, n], &[2.0 * half, 2.0 * half], vec![-half, -half], false).unwrap()
}

#[test]
fn symbol_rows() {
    let o = wext(&["symbol", "--weight", "power:s=0.5", "--lmin", "1", "--lmax", "4", "--num", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("lambda,m,est_error"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    assert!((rows[0][1] - 1.0).abs() < 1e-5 && (rows[1][1] - 2.0).abs() < 1e-5);
}

#[test]
fn bad_weight_is_a_usage_error() {
    let o = wext(&["symbol", "--weight", "expr:t+*2", "--lmin", "1", "--lmax", "2", "--num", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("error[parse]") && e.contains('7'), "{e}");
    assert_eq!(wext(&["symbol", "--bogus"]).status.code(), Some(2));
}

#[test]
fn verify_checks_pass() {
    for args in [
        vec!["verify", "scaling", "--weight", "power:s=0.5"],
        vec!["verify", "poisson", "--s", "0.5", "--modes", "8"],
        vec!["verify", "energy", "--weight", "power:s=0.5", "--n", "64", "--seed", "3"],
        vec!["verify", "weak", "--weight", "power:s=0.5", "--n", "64", "--seed", "3"],
    ] {
        let o = wext(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["pass"], Value::Bool(true), "{args:?}");
    }
}

#[test]
fn failed_check_reports_and_exits_one() {
    let o = wext(&["verify", "scaling", "--weight", "power:s=0.5", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
    assert!(stderr(&o).contains("error[check_failed]"));
    let o = wext(&["verify", "scaling", "--weight", "expr:1+t"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn extend_constant_and_cosine_traces() {
    let dir = TempDir::new().unwrap();
    let grid = GridMeta::periodic(&[32], &[2.0 * PI]).unwrap();

    let trace = path(&dir, "c.wext");
    write_trace(&trace, &TraceField::from_fn(grid.clone(), |_| 0.4).unwrap()).unwrap();
    let out = path(&dir, "c_out.wext");
    let o = wext(&["extend", "--weight", "power:s=0.3", "--trace", s(&trace), "--tlevels", "0,0.5,2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = read_field(&out).unwrap();
    assert_eq!(f.t_levels, vec![0.0, 0.5, 2.0]);
    assert!(f.values.iter().all(|v| (v - 0.4).abs() < 1e-12));

    let trace = path(&dir, "cos.wext");
    write_trace(&trace, &TraceField::from_fn(grid.clone(), |p| p[0].cos()).unwrap()).unwrap();
    let o = wext(&["extend", "--weight", "expr:1", "--trace", s(&trace), "--tlevels", "0,1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = read_field(&out).unwrap();
    for (i, v) in f.level(1).iter().enumerate() {
        assert!((v - (-1f64).exp() * grid.coord(0, i).cos()).abs() < 1e-6);
    }

    let again = path(&dir, "again.wext");
    write_field(&again, &f).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap(), "field files round-trip byte for byte");
}

#[test]
fn trace_op_summary() {
    let dir = TempDir::new().unwrap();
    let grid = GridMeta::periodic(&[32], &[2.0 * PI]).unwrap();
    let trace = path(&dir, "u.wext");
    write_trace(&trace, &TraceField::from_fn(grid, |p| (2.0 * p[0]).sin()).unwrap()).unwrap();
    let out = path(&dir, "f.wext");
    let o = wext(&["trace-op", "--weight", "power:s=0.5", "--trace", s(&trace), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["m_one"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    let f = read_trace(&out).unwrap();
    let u = read_trace(&trace).unwrap();
    assert!(f.values.iter().zip(&u.values).all(|(a, b)| (a - 2.0 * b).abs() < 1e-5));
}

fn rigidity_on(dir: &TempDir, name: &str, field: HalfSpaceField) -> Output {
    let p = path(dir, name);
    write_field(&p, &field).unwrap();
    wext(&["rigidity", "--field", s(&p), "--weight", "power:s=0.5", "--radii", "1,2"])
}

#[test]
fn rigidity_verdicts() {
    let dir = TempDir::new().unwrap();
    let t: Vec<f64> = (0..=32).map(|j| 4.0 * j as f64 / 32.0).collect();
    let layer = HalfSpaceField::from_fn(square(64, 5.0), t.clone(), |p, t| ((0.6 * p[0] + 0.8 * p[1]) / (1.0 + t)).atan()).unwrap();
    let o = rigidity_on(&dir, "layer.wext", layer);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["is_one_dimensional"], Value::Bool(true));
    assert!((v["omega_global"][0].as_f64().unwrap() - 0.6).abs() < 1e-4);
    assert_eq!(v["growth_curve"].as_array().unwrap().len(), 2);

    let bent = HalfSpaceField::from_fn(square(64, 5.0), t.clone(), |p, _| p[1] + 0.5 * p[0] * p[0]).unwrap();
    let o = rigidity_on(&dir, "bent.wext", bent);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["is_one_dimensional"], Value::Bool(false));

    let down = HalfSpaceField::from_fn(square(16, 5.0), t, |p, _| p[0] - p[1]).unwrap();
    let o = rigidity_on(&dir, "down.wext", down);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[not_monotone]"), "{}", stderr(&o));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["verify", "energy", "--weight", "power:s=0.4", "--n", "32", "--seed", "9", "--tlevels", "0,0.5,1,2,4,8"];
    let a = wext(&args);
    let b = wext(&args);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let c = wext(&["verify", "energy", "--weight", "power:s=0.4", "--n", "32", "--seed", "10", "--tlevels", "0,0.5,1,2,4,8"]);
    assert_ne!(a.stdout, c.stdout);

    let dir = TempDir::new().unwrap();
    let trace = path(&dir, "u.wext");
    let grid = GridMeta::periodic(&[16, 16], &[4.0, 4.0]).unwrap();
    write_trace(&trace, &TraceField::from_fn(grid, |p| (PI * p[0] / 2.0).cos() * (PI * p[1]).sin()).unwrap()).unwrap();
    let (x, y) = (path(&dir, "x.wext"), path(&dir, "y.wext"));
    for out in [&x, &y] {
        let o = wext(&["extend", "--weight", "power:s=0.6", "--trace", s(&trace), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap());
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.json");
    fs::write(&cfg, r#"{"weight": "power:s=0.5", "lambda_grid": {"min": 1, "max": 16, "count": 3, "log": true}}"#).unwrap();
    let o = wext(&["--config", s(&cfg), "symbol"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!((rows[1][0] - 4.0).abs() < 1e-12 && (rows[1][1] - 2.0).abs() < 1e-5);

    let o = wext(&["--config", s(&cfg), "symbol", "--num", "2", "--weight", "expr:1"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!((rows[1][1] - 4.0).abs() < 1e-5);

    fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(wext(&["--config", s(&cfg), "symbol"]).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["symbol", "--weight", "power:s=0.3", "--lmin", "0.1", "--lmax", "100", "--num", "12", "--log"];
    let one = Command::new(env!("CARGO_BIN_EXE_wext")).args(args).env("WEXT_THREADS", "1").output().unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_wext")).args(args).env("WEXT_THREADS", "4").output().unwrap();
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_wext")).args(args).env("WEXT_THREADS", "0").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
