use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn optdesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optdesign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn weights_by_point(v: &Value) -> Vec<(Vec<f64>, f64)> {
    let support = v["support"].as_array().unwrap();
    let weights = v["weights"].as_array().unwrap();
    support
        .iter()
        .zip(weights)
        .map(|(x, w)| {
            let x: Vec<f64> = x.as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
            (x, w.as_f64().unwrap())
        })
        .collect()
}

fn weight_at(v: &Value, x: &[f64]) -> f64 {
    weights_by_point(v)
        .into_iter()
        .filter(|(p, _)| p.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-9))
        .map(|(_, w)| w)
        .sum()
}

#[test]
fn optimize_one_factor_d() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("d.json");
    let res = optdesign(&[
        "optimize", "--model", "one-factor", "--beta", "1,1", "--criterion", "D", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = read_json(&out);
    assert!((weight_at(&v["design"], &[0.0]) - 0.5).abs() < 1e-9);
    assert!((weight_at(&v["design"], &[1.0]) - 0.5).abs() < 1e-9);
    assert!(v["certificate"]["max_sensitivity"].as_f64().unwrap() <= 2.0 + 1e-6);
    assert!(v["iterations"].is_u64());
}

#[test]
fn optimize_then_transfer_table_row() {
    let dir = TempDir::new().unwrap();
    let opt = dir.path().join("opt.json");
    let res = optdesign(&[
        "optimize", "--model", "two-factor", "--beta", "1,3,3", "--criterion", "IMSE", "--out",
        opt.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("0.236") && stdout.contains("0.382"), "{stdout}");
    let v = read_json(&opt);
    assert!((weight_at(&v["design"], &[0.0, 0.0]) - 0.236).abs() < 1e-3);
    assert_eq!(weight_at(&v["design"], &[1.0, 1.0]), 0.0);

    let design = dir.path().join("design.json");
    fs::write(&design, v["design"].to_string()).unwrap();
    let bundle = dir.path().join("bundle.json");
    let res = optdesign(&[
        "transfer", "--model", "two-factor", "--beta", "1,3,3", "--criterion", "IMSE",
        "--design", design.to_str().unwrap(), "--transform", "reflect:1,2",
        "--param-mode", "intercept_rescaled", "--assert-optimal", "--out", bundle.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let b = read_json(&bundle);
    let beta: Vec<f64> = b["beta"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((beta[0] - 1.0).abs() < 1e-12);
    assert!((beta[1] + 3.0 / 7.0).abs() < 1e-12 && (beta[2] + 3.0 / 7.0).abs() < 1e-12);
    assert!((weight_at(&b["design"], &[1.0, 1.0]) - 0.236).abs() < 1e-3);
    assert_eq!(weight_at(&b["design"], &[0.0, 0.0]), 0.0);
    assert_eq!(b["certificate"]["passed"], Value::Bool(true));
}

#[test]
fn transfer_shift_scale_and_inverse() {
    let dir = TempDir::new().unwrap();
    let design = dir.path().join("design.json");
    fs::write(&design, r#"{"support":[[0.0],[1.0]],"weights":[0.5,0.5]}"#).unwrap();
    let bundle = dir.path().join("bundle.json");
    let res = optdesign(&[
        "transfer", "--model", "one-factor", "--beta", "1,1", "--design", design.to_str().unwrap(),
        "--transform", "shift_scale:2,3", "--assert-optimal", "--out", bundle.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let b = read_json(&bundle);
    assert_eq!(weight_at(&b["design"], &[2.0]), 0.5);
    assert_eq!(weight_at(&b["design"], &[5.0]), 0.5);

    let model = dir.path().join("model.json");
    fs::write(&model, r#"{"dim_x":1,"basis":"linear","region":{"lower":[2.0],"upper":[5.0]}}"#).unwrap();
    let image = dir.path().join("image.json");
    fs::write(&image, b["design"].to_string()).unwrap();
    let back = dir.path().join("back.json");
    let beta = b["beta"].as_array().unwrap().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let res = optdesign(&[
        "transfer", "--model", model.to_str().unwrap(), "--beta", &beta, "--design", image.to_str().unwrap(),
        "--transform", "shift_scale:2,3", "--inverse", "--out", back.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let r = read_json(&back);
    assert!((weight_at(&r["design"], &[0.0]) - 0.5).abs() < 1e-12);
    let beta_back: Vec<f64> = r["beta"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((beta_back[0] - 1.0).abs() < 1e-12 && (beta_back[1] - 1.0).abs() < 1e-12);
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"support":[[0.0],[1.0]],"weights":[0.5,0.5]}"#).unwrap();
    let res = optdesign(&["check", "--model", "one-factor", "--beta", "1,1", "--design", good.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"support":[[0.0],[0.5]],"weights":[0.5,0.5]}"#).unwrap();
    let res = optdesign(&["check", "--model", "one-factor", "--beta", "1,1", "--design", bad.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
}

#[test]
fn input_errors_exit_one() {
    let res = optdesign(&["optimize", "--model", "one-factor", "--beta", "1,-2"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("not positive"));
    let res = optdesign(&["optimize", "--model", "missing.json", "--beta", "1,1"]);
    assert_eq!(code(&res), 1);
    let res = optdesign(&["optimize", "--model", "one-factor"]);
    assert_eq!(code(&res), 1);
    let res = optdesign(&["reproduce", "table9"]);
    assert_eq!(code(&res), 1);
}

#[test]
fn info_reports_region() {
    let res = optdesign(&["info", "--model", "two-factor", "--beta", "1,2,2"]);
    assert_eq!(code(&res), 0);
    assert!(String::from_utf8_lossy(&res.stdout).contains("B1"));
}

#[test]
fn maximin_with_limit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("maximin.json");
    let curve = dir.path().join("curve.csv");
    let res = optdesign(&[
        "maximin", "--include-gamma-infinity-limit", "--out", out.to_str().unwrap(), "--curve",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let v = read_json(&out);
    assert!((v["w"].as_f64().unwrap() - 0.21132).abs() < 1e-4);
    assert!((v["min_efficiency"].as_f64().unwrap() - 0.8660).abs() < 1e-3);
    let text = fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("param,value\n"));
}

#[test]
fn reproduce_targets() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    for target in ["table1", "prop1", "fig3", "fig4"] {
        let res = optdesign(&["reproduce", target, "--out", d]);
        assert_eq!(code(&res), 0, "{target}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let fig3 = fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    assert!(fig3.starts_with("param,value,value2\n"));
    let fig4 = read_json(&dir.path().join("fig4.json"));
    assert!(fig4["efficiency_at_gamma_one"].as_f64().unwrap() >= 0.8660 - 1e-3);

    let first = fs::read_to_string(dir.path().join("prop1.csv")).unwrap();
    let again = TempDir::new().unwrap();
    optdesign(&["reproduce", "prop1", "--out", again.path().to_str().unwrap()]);
    assert_eq!(first, fs::read_to_string(again.path().join("prop1.csv")).unwrap());
}

#[test]
fn reproduce_table2_reports_the_mismatching_row() {
    let dir = TempDir::new().unwrap();
    let res = optdesign(&["reproduce", "table2", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stdout.contains("1 3 3") && stdout.contains("0.382"));
    // the computed optimum at (1,1,1) differs from the printed row by 1.8e-3
    assert_eq!(code(&res), 2, "{stderr}");
    assert!(stderr.contains("beta (1 1 1)"));
    assert!(!stderr.contains("beta (1 3 3)"));
}
