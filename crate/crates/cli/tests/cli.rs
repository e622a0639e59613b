use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn gendev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gendev")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const CURVE: &str = "t,x1,x2\n0,0,0\n0.5,0.2,0.1\n1,0.3,0.4\n";

#[test]
fn check_on_the_sphere() {
    let dir = TempDir::new().unwrap();
    let curve = write(&dir, "c1.csv", CURVE);
    let out = dir.path().join("r.json").display().to_string();
    let o = gendev(&["check", "--config", &cfg("sphere.cfg"), "--curve", &curve, "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out);
    for key in ["gauss", "codazzi", "ricci"] {
        assert!(r[key].as_f64().unwrap() <= 1e-7, "{r}");
    }
    assert_eq!(r["step"].as_f64(), Some(1e-3));
    assert_eq!(r["tol"].as_f64(), Some(1e-7));
    assert_eq!(r["pass"], Value::Bool(true));
}

#[test]
fn step_and_tol_are_echoed() {
    let dir = TempDir::new().unwrap();
    let curve = write(&dir, "c1.csv", CURVE);
    let out = dir.path().join("r.json").display().to_string();
    let o = gendev(&[
        "check", "--config", &cfg("sphere.cfg"), "--curve", &curve, "--out", &out, "--step", "5e-4", "--tol", "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out);
    assert_eq!(r["step"].as_f64(), Some(5e-4));
    assert_eq!(r["tol"].as_f64(), Some(1e-9));
}

#[test]
fn flat_mesh_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.obj").display().to_string();
    let o = gendev(&["reconstruct", "--config", &cfg("flat.cfg"), "--grid", "4x4", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let obj = fs::read_to_string(&out).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 16);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 9);
}

#[test]
fn format_follows_extension_or_flag() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("m.csv").display().to_string();
    let o = gendev(&["reconstruct", "--config", &cfg("flat.cfg"), "--grid", "3x2", "--out", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 7);
    let out = dir.path().join("m.txt").display().to_string();
    let o = gendev(&["reconstruct", "--config", &cfg("flat.cfg"), "--grid", "3x2", "--format", "json", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&out);
    assert_eq!(r["valid"].as_u64(), Some(6));
    assert_eq!(r["records"].as_array().unwrap().len(), 6);
    assert_eq!(r["pass"], Value::Bool(true));
}

#[test]
fn missing_ambient_section() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("flat.cfg")).unwrap().replace("[ambient]\ndim = 3\nmetric = euclidean\n", "");
    let bad = write(&dir, "bad.cfg", &text);
    let curve = write(&dir, "c.csv", CURVE);
    let o = gendev(&["develop", "--config", &bad, "--curve", &curve]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[ambient]"), "{}", stderr(&o));
}

#[test]
fn duplicate_key_names_the_line() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("flat.cfg")).unwrap().replace("g_2_2 = 1", "g_2_2 = 1\ng_2_2 = 2");
    let bad = write(&dir, "bad.cfg", &text);
    let curve = write(&dir, "c.csv", CURVE);
    let o = gendev(&["check", "--config", &bad, "--curve", &curve]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    let o = gendev(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = gendev(&["check", "--config", &cfg("flat.cfg"), "--curve", "x.csv", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = gendev(&["check", "--config", "/nonexistent.cfg", "--curve", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(gendev(&["--help"]).status.success());
}

#[test]
fn leaving_the_chart_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("flat.cfg"))
        .unwrap()
        .replace("g_2_2 = 1", "g_2_2 = 1\ndomain = -0.1 0.1, -0.1 0.1");
    let small = write(&dir, "small.cfg", &text);
    let curve = write(&dir, "c.csv", CURVE);
    let o = gendev(&["check", "--config", &small, "--curve", &curve]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn audit_is_reproducible_and_detects_violations() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json").display().to_string();
    let b = dir.path().join("b.json").display().to_string();
    for out in [&a, &b] {
        let o = gendev(&["audit", "--config", &cfg("sphere.cfg"), "--seed", "7", "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let r = json(&a);
    assert!(r["spread"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["seed"].as_u64(), Some(7));
    assert_eq!(r["endpoints"].as_array().unwrap().len(), 10);

    let scaled = fs::read_to_string(configs().join("sphere.cfg"))
        .unwrap()
        .replace("h_1_1_1 = 4/", "h_1_1_1 = 1.1*4/")
        .replace("h_1_2_2 = 4/", "h_1_2_2 = 1.1*4/");
    let bad = write(&dir, "scaled.cfg", &scaled);
    let o = gendev(&["audit", "--config", &bad, "--out", &a]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&a);
    assert!(r["spread"].as_f64().unwrap() >= 1e-3, "{r}");
    assert_eq!(r["pass"], Value::Bool(false));
}

#[test]
fn variation_reports() {
    for name in ["sphere.cfg", "equator.cfg"] {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("v.json").display().to_string();
        let o = gendev(&["variation", "--config", &cfg(name), "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let r = json(&out);
        assert!(r["max"].as_f64().unwrap() <= 1e-7, "{name}: {r}");
        for key in ["max_U_alpha", "max_U_diff", "max_Xab_diff", "max_Xalphabeta_diff", "max_Xaalpha_diff"] {
            assert!(r[key].is_number(), "{key}");
        }
    }
}

#[test]
fn flat_transport_and_development() {
    let dir = TempDir::new().unwrap();
    let curve = write(&dir, "c.csv", CURVE);
    let o = gendev(&["transport", "--config", &cfg("flat.cfg"), "--curve", &curve, "--vector=0.5,-2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["transported"], serde_json::json!([0.5, -2.0]));

    // in the flat plane the development of a curve in T_pM is the curve itself
    let o = gendev(&["develop", "--config", &cfg("flat.cfg"), "--curve", &curve]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2\n"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[1] - 0.3).abs() < 1e-12 && (last[2] - 0.4).abs() < 1e-12, "{last:?}");

    let o = gendev(&["transport", "--config", &cfg("flat.cfg"), "--curve", &curve, "--vector=1,2,3,4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sphere_generalized_development_stays_on_the_sphere() {
    let dir = TempDir::new().unwrap();
    let curve = write(&dir, "c.csv", "t,x1,x2\n0,0,0\n0.5,0.4,0.2\n1,0.9,0.1\n");
    let o = gendev(&["gdevelop", "--config", &cfg("sphere.cfg"), "--curve", &curve]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("t,x1,x2,x3\n"));
    for line in text.lines().skip(1) {
        let y: Vec<f64> = line.split(',').skip(1).map(|s| s.parse().unwrap()).collect();
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        assert!((r - 1.0).abs() < 1e-6, "{line}");
    }
}

#[test]
fn equator_band_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("band.csv").display().to_string();
    let o = gendev(&["reconstruct", "--config", &cfg("equator.cfg"), "--grid", "5x3", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (j, y) = (f[1], &f[5..8]);
        let t = -0.5 + 0.5 * j;
        assert!((y[2] - t.sin()).abs() < 1e-6, "{line}");
        assert!(((y[0] * y[0] + y[1] * y[1]).sqrt() - t.cos()).abs() < 1e-6, "{line}");
    }
}
