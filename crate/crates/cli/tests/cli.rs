use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_o3tensor"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.push("--json");
    serde_json::from_str(&stdout(&a)).unwrap()
}

#[test]
fn reduce_prints_irreps() {
    assert_eq!(stdout(&["reduce", "ijkl=jikl=ijlk=klij", "-i", "i=1o"]), "2x0e+2x2e+1x4e\n");
    assert_eq!(stdout(&["reduce", "ij=ji", "--index", "i=1o"]), "1x0e+1x2e\n");
    assert_eq!(stdout(&["reduce", "ij=-ji", "-i", "i=1o"]), "1x1e\n");
}

#[test]
fn reduce_basis_rows() {
    let v = json(&["reduce", "ij=ji", "-i", "i=1o", "--basis"]);
    assert_eq!(v["dim"], 6);
    let rows = v["basis"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 9));
    let text = stdout(&["reduce", "ij=ji", "-i", "i=1o", "--basis"]);
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn zero_tensor_is_a_usage_error() {
    let out = run(&["reduce", "ij=-ij", "-i", "i=1o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("formula forces zero tensor"));
}

#[test]
fn cg_111_is_levi_civita() {
    let text = stdout(&["cg", "1", "1", "1"]);
    assert_eq!(text.lines().count(), 27);
    let nonzero: Vec<f64> = text
        .lines()
        .map(|l| l.split_whitespace().nth(3).unwrap().parse::<f64>().unwrap())
        .filter(|v| *v != 0.0)
        .collect();
    assert_eq!(nonzero.len(), 6);
    assert!(nonzero.iter().all(|v| (v.abs() - 1.0 / 6f64.sqrt()).abs() < 1e-11));
    assert_eq!(run(&["cg", "1", "1", "3"]).status.code(), Some(2));
}

#[test]
fn sh_on_axis() {
    assert_eq!(stdout(&["sh", "--lmax", "1", "--point", "0,0,1"]), "l=0: 1\nl=1: 0 0 1\n");
    let v = json(&["sh", "--lmax", "2", "--point", "0,2,0", "--no-normalize", "--normalization", "component"]);
    assert_eq!(v["values"].as_array().unwrap().len(), 9);
    assert_eq!(v["values"][0], 1.0);
}

#[test]
fn wigner_is_rotation_matrix_for_l1() {
    let v = json(&["wigner", "--l", "1", "--angles", "0,0,0"]);
    let m = v["matrix"].as_array().unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.as_array().unwrap().iter().enumerate() {
            assert!((x.as_f64().unwrap() - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert_eq!(stdout(&["wigner", "--l", "1", "--angles", "0,0,0"]), "1 0 0\n0 1 0\n0 0 1\n");
    let text = stdout(&["wigner", "--l", "2", "--angles", "0.3,-1.1,2.0"]);
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn tp_info_for_two_vector_example() {
    let text = stdout(&["tp-info", "tests/data/two_vectors.json"]);
    assert_eq!(text.lines().next().unwrap(), "paths: 4, weights: 4");
    let v = json(&["tp-info", "tests/data/two_vectors.json"]);
    assert_eq!((v["paths"].as_u64(), v["weights"].as_u64()), (Some(4), Some(4)));
}

#[test]
fn invalid_spec_is_rejected() {
    let out = run(&["tp-info", "tests/data/invalid.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parity"));
    assert_eq!(run(&["tp-info", "tests/data/missing.json"]).status.code(), Some(2));
}

#[test]
fn tp_check_passes() {
    let v = json(&["tp-check", "tests/data/fully_connected.json", "--seed", "3"]);
    assert_eq!(v["passed"], true);
    assert!(v["equivariance_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn check_equivariance_kinds() {
    for spec in ["fully_connected", "linear", "sh"] {
        let path = format!("tests/data/{spec}.json");
        let v = json(&["check-equivariance", &path, "--trials", "8"]);
        assert_eq!(v["passed"], true, "{spec}");
        assert_eq!(v["trials"], 8);
    }
    let out = run(&["check-equivariance", "tests/data/sh.json", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn s2_roundtrip() {
    let v = json(&["s2", "roundtrip", "--L", "5", "--res-beta", "8", "--res-alpha", "16"]);
    assert!(v["max_error"].as_f64().unwrap() < 1e-9);
    assert_eq!(run(&["s2", "roundtrip", "--L", "5", "--res-alpha", "4"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["cg", "1"]).status.code(), Some(2));
    assert_eq!(run(&["reduce", "ij=ji", "-i", "i1o"]).status.code(), Some(2));
    assert_eq!(run(&["sh", "--lmax", "1", "--point", "0,1"]).status.code(), Some(2));
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["tp-check", "tests/data/fully_connected.json", "--seed", "11", "--json"][..],
        &["check-equivariance", "tests/data/linear.json", "--seed", "5", "--json"][..],
        &["s2", "roundtrip", "--L", "3", "--seed", "2", "--json"][..],
    ] {
        assert_eq!(run(args).stdout, run(args).stdout, "{args:?}");
    }
}
