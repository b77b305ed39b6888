use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpfin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

#[test]
fn g_family_is_douglas() {
    let out = run(&[
        "verify", "--family", "g-family", "--h", "1+r^2", "--G", "sqrt(t^2+0.5)", "--n", "3", "--checks", "douglas",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&out);
    assert_eq!(rep["pass"], true);
    assert!(check(&rep, "douglas")["sup_norm"].as_f64().unwrap() < 1e-9);
}

#[test]
fn randers_is_douglas_but_not_berwald() {
    let out = run(&[
        "verify", "--family", "randers", "--f", "1+r", "--g", "1", "--b", "0.3", "--checks", "douglas,berwald",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&out);
    assert_eq!(check(&rep, "douglas")["pass"], true);
    let b = check(&rep, "berwald");
    assert_eq!(b["pass"], false);
    assert!(b["sup_norm"].as_f64().unwrap() > 1e-3);
    assert!(b["worst_point"].is_object());
}

#[test]
fn example_three_preset() {
    let out = run(&["verify", "--preset", "example-3", "--checks", "douglas"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn flat_point_report() {
    let out = run(&["point", "--preset", "flat", "--xbar", "0.5,0", "--ybar", "1,0", "--y0", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&out);
    let g: Vec<f64> = rep["g"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(g.len(), 9);
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[3 * i + j] - want).abs() < 1e-12);
        }
    }
    for key in ["douglas", "berwald", "landsberg"] {
        let data = rep[key]["data"].as_array().unwrap();
        assert!(data.iter().all(|v| v.as_f64().unwrap().abs() < 1e-12), "{key}");
    }
    assert!(rep["ricci"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn scan_reports_first_failing_radius() {
    let out = run(&["scan-convexity", "--family", "randers", "--f", "1", "--g", "1", "--b", "2*r", "--n", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&out);
    let r = rep["convexity"]["first_failing_r"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&r), "{r}");
    assert_eq!(rep["convexity"]["hessian_agreement"], true);
}

#[test]
fn oracle_on_perturbed_preset() {
    let out = run(&["oracle", "--preset", "perturbed", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    for c in rep["report"]["checks"].as_array().unwrap() {
        assert!(c["sup_norm"].as_f64().unwrap() < 1e-5, "{c}");
    }
    let comps = rep["components"].as_array().unwrap();
    // Independent components of a tensor symmetric in its three lower indices.
    assert_eq!(comps.len(), 2 * 4 * 20);
}

#[test]
fn usage_and_domain_errors_exit_two() {
    assert_eq!(run(&["verify", "--family", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["verify"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--preset", "flat", "--checks", "bogus"]).status.code(), Some(2));
    let out = run(&["point", "--preset", "randers", "--xbar", "1.5,0", "--ybar", "1,0", "--y0", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&[
            "verify", "--preset", "randers", "--checks", "douglas,berwald,landsberg", "--seed", "11", "--samples", "30",
            "--no-timing", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(
        &cfg,
        r#"{"family": {"family": "preset", "name": "example-1"}, "n": 2, "samples": 12, "checks": ["douglas"]}"#,
    )
    .unwrap();
    let csv = dir.path().join("points.csv");
    let out = run(&[
        "verify", "--config", cfg.to_str().unwrap(), "--per-point", csv.to_str().unwrap(), "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.lines().next().unwrap().contains("name"));
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 13);
}
