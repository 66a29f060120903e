use serde_json::Value;
use std::process::{Command, Output};

fn tanno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tanno")).args(args).output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn analyze_heisenberg_has_no_certificates() {
    let out = tanno(&["analyze", "heisenberg"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let res = &r["results"];
    let cd: Vec<f64> = res["cd"]["cd"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let expected = [0.0, 0.5, 0.0, 1.0, 2.0];
    for (a, b) in cd.iter().zip(expected) {
        assert!((a - b).abs() < 1e-10, "{cd:?}");
    }
    assert_eq!(res["compact"], Value::Bool(false));
    assert!(res["spectral_gap"]["gap_lower_bound"].is_null());
    assert_eq!(res["volume"]["finite_volume"], Value::Bool(false));
    assert_eq!(res["message"], "no positive certificate");
    assert_eq!(r["command"], "analyze");
    assert_eq!(r["model"]["name"], "heisenberg(1)");
}

#[test]
fn analyze_compact_twist() {
    let out = tanno(&["analyze", "twisted", "--a=-1", "--b=1"]);
    assert_eq!(out.status.code(), Some(0));
    let res = &report(&out)["results"];
    assert_eq!(res["compact"], Value::Bool(true));
    assert!(res["spectral_gap"]["gap_lower_bound"].as_f64().unwrap() >= 1.0 / 3.0 - 1e-10);
    // negative values also parse as separate tokens
    let out = tanno(&["analyze", "twisted", "--a", "-1", "--b", "1"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn bad_model_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("badfile.json");
    std::fs::write(&bad, r#"{"n": 1, "backend": "chart", "frame": [], "colour": 3}"#).unwrap();
    let out = tanno(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema error"));
    assert!(out.stdout.is_empty());

    let out = tanno(&["analyze", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = tanno(&["analyze", "nosuchmodel"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tanno(&[]).status.code(), Some(2));
    assert_eq!(tanno(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tanno(&["verify", "heisenberg", "--count", "ten"]).status.code(), Some(2));
    assert_eq!(tanno(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_examples() {
    let out = tanno(&["verify", "heisenberg", "--count", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let ids = &report(&out)["results"]["identities"];
    for key in ["bochner_horizontal", "bochner_vertical", "rescaled_identity", "converse_equality"] {
        assert!(ids[key]["max_residual"].as_f64().unwrap() < 1e-8, "{key}");
    }
    assert_eq!(tanno(&["verify", "twisted", "--a=0", "--b=1"]).status.code(), Some(0));
}

#[test]
fn fault_injection_exits_1_with_witness() {
    let out = tanno(&["verify", "heisenberg", "--count", "20", "--inject-fault", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    let h = &r["results"]["identities"]["bochner_horizontal"];
    assert_eq!(h["passed"], Value::Bool(false));
    assert!(h["witness"]["point"].is_array());
    assert!(h["witness"]["index"].is_u64());
}

#[test]
fn simulate_examples() {
    let out = tanno(&["simulate", "heisenberg", "--check", "completeness"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["results"]["escaped_fraction"].as_f64().unwrap() < 1e-3);

    let out = tanno(&["simulate", "heisenberg", "--check", "variance"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not compact"));

    let out = tanno(&["simulate", "twisted", "--a=-1", "--b=1", "--check", "variance"]);
    assert_eq!(out.status.code(), Some(0));
    let v = &report(&out)["results"];
    let (rate, ci) = (v["rate"].as_f64().unwrap(), v["ci_half_width"].as_f64().unwrap());
    assert!(rate >= 2.0 / 3.0 - ci);
    assert_eq!(v["times"].as_array().unwrap().len(), 4);
}

#[test]
fn json_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = tanno(&["analyze", "heisenberg", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read(&path).unwrap();
    assert_eq!(text, tanno(&["analyze", "heisenberg"]).stdout);
}

#[test]
fn csv_dump_has_one_row_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paths.csv");
    let out = tanno(&["simulate", "heisenberg", "--paths", "25", "--t", "0.1", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,escaped_at,x0,x1,x2");
    assert_eq!(lines.len(), 26);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["analyze", "shear", "--samples", "16"][..],
        &["verify", "twisted", "--a=1", "--b=1", "--count", "20", "--seed", "3"][..],
        &["simulate", "shear", "--paths", "200", "--t", "0.2", "--seed", "7"][..],
    ] {
        let a = tanno(args);
        let b = tanno(args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn models_lists_the_catalog() {
    let out = tanno(&["models"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = report(&out)["results"]["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap().to_string())
        .collect();
    for n in ["heisenberg", "twisted", "shear"] {
        assert!(names.iter().any(|x| x == n), "{names:?}");
    }
}
