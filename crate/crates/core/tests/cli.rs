use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn condcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condcov")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn write_rows(dir: &Path, name: &str, rows: &[&[f64]]) -> PathBuf {
    let path = dir.join(name);
    let body = serde_json::json!({ "rows": rows });
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn write_csv(dir: &Path, name: &str, rows: &[&[f64]]) -> PathBuf {
    let path = dir.join(name);
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(&path, text).unwrap();
    path
}

// Limit and first-order coefficient of the five-node family, from a symbolic
// solve of the Lyapunov equation.
const SIGMA5: [[f64; 5]; 5] = [
    [1.5, 0.5, 0.5, 0.5, 0.375],
    [0.5, 1.0, 0.5, 0.5, 0.25],
    [0.5, 0.5, 1.5, 1.5, 0.875],
    [0.5, 0.5, 1.5, 1.5, 0.875],
    [0.375, 0.25, 0.875, 0.875, 1.875],
];
const SIGMA5_FIRST: [[f64; 5]; 5] = [
    [0.0, 0.0, 0.0, 0.0, -0.125],
    [0.0, 0.0, 0.0, -0.5, -0.25],
    [0.0, 0.0, 0.0, -1.0, -0.625],
    [0.0, -0.5, -1.0, 0.0, 0.0],
    [-0.125, -0.25, -0.625, 0.0, 0.0],
];

fn as_rows<const N: usize>(m: &[[f64; N]; N]) -> Vec<&[f64]> {
    m.iter().map(|r| r.as_slice()).collect()
}

#[test]
fn check_five_node_example() {
    let dir = TempDir::new().unwrap();
    let s = write_rows(dir.path(), "sigma.json", &as_rows(&SIGMA5));
    let s1 = write_csv(dir.path(), "sigma1.csv", &as_rows(&SIGMA5_FIRST));
    let out = condcov(&[
        "check", "--sigma", s.to_str().unwrap(), "--sigma1", s1.to_str().unwrap(), "--cond", "2,3,4", "--target", "1,5",
        "--json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["condition_i_value"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
    assert!((v["limit_conditional"]["rows"][0][1].as_f64().unwrap() - 0.1).abs() <= 1e-10);
    assert_eq!(v["verdict"], "converges-by-theorem");
    assert_eq!(v["rank_r"], 2);
    let table = v["empirical_table"].as_array().unwrap();
    assert_eq!(table.len(), 5);
    for row in table {
        let m = row["m"].as_f64().unwrap();
        assert!(row["error"].as_f64().unwrap() <= 10.0 / m, "{row}");
    }
}

#[test]
fn check_text_and_json_agree() {
    let dir = TempDir::new().unwrap();
    let s = write_rows(dir.path(), "sigma.json", &as_rows(&SIGMA5));
    let s1 = write_rows(dir.path(), "sigma1.json", &as_rows(&SIGMA5_FIRST));
    let base = ["check", "--sigma", s.to_str().unwrap(), "--sigma1", s1.to_str().unwrap(), "--cond", "2,3,4", "--target", "1,5"];
    let text = String::from_utf8(condcov(&base).stdout).unwrap();
    let mut with_json = base.to_vec();
    with_json.push("--json");
    let v = json(&condcov(&with_json));
    let f = v["condition_i_value"].as_f64().unwrap();
    assert!(text.contains(&format!("f = {f}")), "{text}");
    for row in v["empirical_table"].as_array().unwrap() {
        assert!(text.contains(&row["error"].as_f64().unwrap().to_string()));
    }
    assert!(text.contains("verdict: converges-by-theorem"));
}

#[test]
fn check_identity_converges_trivially() {
    let dir = TempDir::new().unwrap();
    let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let zero = vec![vec![0.0; 3]; 3];
    let s = write_rows(dir.path(), "s.json", &eye.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let s1 = write_rows(dir.path(), "s1.json", &zero.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let out = condcov(&["check", "--sigma", s.to_str().unwrap(), "--sigma1", s1.to_str().unwrap(), "--cond", "2", "--target", "1,3", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["condition_i_value"], 1.0);
    assert_eq!(v["limit_conditional"]["rows"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
}

#[test]
fn check_input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let eye = [[1.0, 0.0], [0.0, 1.0]];
    let s = write_rows(dir.path(), "s.json", &as_rows(&eye));
    let (s, missing) = (s.to_str().unwrap(), dir.path().join("missing.json"));
    let overlap = condcov(&["check", "--sigma", s, "--sigma1", s, "--cond", "1", "--target", "1,2"]);
    assert_eq!(code(&overlap), 1);
    assert!(String::from_utf8_lossy(&overlap.stderr).contains("overlap"));
    let out = condcov(&["check", "--sigma", s, "--sigma1", missing.to_str().unwrap(), "--cond", "1", "--target", "2"]);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"rows\": [[1, 2], [3]]}").unwrap();
    assert_eq!(code(&condcov(&["check", "--sigma", bad.to_str().unwrap(), "--sigma1", s, "--cond", "1", "--target", "2"])), 1);
    let asym = write_rows(dir.path(), "asym.json", &as_rows(&[[1.0, 0.5], [0.0, 1.0]]));
    assert_eq!(code(&condcov(&["check", "--sigma", asym.to_str().unwrap(), "--sigma1", s, "--cond", "1", "--target", "2"])), 1);
    assert_eq!(code(&condcov(&["check", "--sigma", s, "--sigma1", s, "--cond", "1,1", "--target", "2"])), 1);
    assert_eq!(code(&condcov(&["check", "--sigma", s, "--sigma1", s, "--cond", "3", "--target", "2"])), 1);
}

#[test]
fn trek_commands() {
    let general = condcov(&["trek", "--left", "3", "--right", "4", "--json"]);
    assert_eq!(code(&general), 0);
    let v = json(&general);
    assert!((v["computed_limit"].as_f64().unwrap() - 5.0 / 48.0).abs() <= 1e-8);
    assert_eq!(v["case"], "general");
    assert_eq!(v["report"]["verdict"], "converges-by-theorem");
    assert_eq!(v["confirmed"], true);

    let path = json(&condcov(&["trek", "--left", "0", "--right", "4", "--json"]));
    assert!((path["computed_limit"].as_f64().unwrap() + 1.0 / 24.0).abs() <= 1e-8);

    let left_one = json(&condcov(&["trek", "--left", "1", "--right", "3", "--json"]));
    assert!((left_one["computed_limit"].as_f64().unwrap() - 0.1).abs() <= 1e-8);

    // (2, 3) has a_l ≥ 2 and a_r > 2, so it follows the general construction
    let short = json(&condcov(&["trek", "--left", "2", "--right", "3", "--json"]));
    assert_eq!(short["case"], "general");
    assert!((short["computed_limit"].as_f64().unwrap() - 5.0 / 48.0).abs() <= 1e-8);

    let small = condcov(&["trek", "--left", "1", "--right", "1"]);
    assert_eq!(code(&small), 0);
    assert!(String::from_utf8_lossy(&small.stdout).contains("none known"));

    assert_eq!(code(&condcov(&["trek", "--left", "2", "--right", "0"])), 1);
    assert_eq!(code(&condcov(&["trek", "--left", "-1", "--right", "3"])), 1);
}

#[test]
fn lemma_commands() {
    let out = condcov(&["lemma", "--k", "4", "--r", "1", "--trials", "50", "--seed", "7", "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["passed"], 50);
    assert!(v["worst_ratio_error"].as_f64().unwrap() <= 1e-9);

    let out = condcov(&["lemma", "--k", "5", "--r", "2", "--trials", "20", "--seed", "1", "--json"]);
    let v = json(&out);
    assert_eq!(v["m_probe"], 1e6);
    assert!(v["worst_ratio_error"].as_f64().unwrap() <= 1e-3, "{v}");
    assert_eq!(code(&out), 0);

    assert_eq!(code(&condcov(&["lemma", "--k", "2", "--r", "2"])), 1);
    assert_eq!(code(&condcov(&["lemma", "--k", "3", "--r", "0"])), 1);
}

#[test]
fn lyapunov_commands() {
    let dir = TempDir::new().unwrap();
    let m4 = [[-1.0, 1.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0], [0.0, 1.0, -1.0, 0.0], [0.0, 0.0, 1.0, -1.0]];
    let path = write_csv(dir.path(), "m4.csv", &as_rows(&m4));
    let out = condcov(&["lyapunov", "--matrix", path.to_str().unwrap(), "--json"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(v["residual"].as_f64().unwrap() <= 1e-10);
    let expected = [[1.5, 0.5, 0.5, 0.375], [0.5, 1.0, 0.5, 0.25], [0.5, 0.5, 1.5, 0.875], [0.375, 0.25, 0.875, 1.875]];
    for (i, row) in expected.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert!((v["sigma"]["rows"][i][j].as_f64().unwrap() - x).abs() <= 1e-10);
        }
    }

    let eye = write_rows(dir.path(), "eye.json", &as_rows(&[[1.0, 0.0], [0.0, 1.0]]));
    let out = condcov(&["lyapunov", "--matrix", eye.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("spectral abscissa: 1"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectral abscissa 1"));
    let v = json(&condcov(&["lyapunov", "--matrix", eye.to_str().unwrap(), "--json"]));
    assert_eq!(v["stable"], false);
    assert!((v["spectral_abscissa"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn toeplitz_commands() {
    let v = json(&condcov(&["toeplitz", "--n", "5", "--json"]));
    assert_eq!(v["closed_form"], -32.0);
    assert!((v["elimination"].as_f64().unwrap() + 32.0).abs() < 1e-9);
    assert_eq!(v["matches"], true);
    let out = condcov(&["toeplitz", "--n", "5", "--replace", "1"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("closed form: 8"));
    let v = json(&condcov(&["toeplitz", "--n", "5", "--replace", "3", "--json"]));
    assert_eq!(v["closed_form"], 0.0);
    assert_eq!(code(&condcov(&["toeplitz", "--n", "0"])), 1);
}

#[test]
fn json_output_is_deterministic() {
    for args in [
        vec!["lemma", "--k", "4", "--r", "2", "--trials", "5", "--seed", "11", "--json"],
        vec!["trek", "--left", "2", "--right", "4", "--json"],
        vec!["lyapunov", "--random", "5", "--seed", "9", "--json"],
    ] {
        let a = condcov(&args);
        let b = condcov(&args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn tolerance_flags_are_applied() {
    let dir = TempDir::new().unwrap();
    let s = write_rows(dir.path(), "sigma.json", &as_rows(&SIGMA5));
    let s1 = write_rows(dir.path(), "sigma1.json", &as_rows(&SIGMA5_FIRST));
    // a threshold far above |f| = 2 turns the verdict negative
    let out = condcov(&[
        "check", "--sigma", s.to_str().unwrap(), "--sigma1", s1.to_str().unwrap(), "--cond", "2,3,4", "--target", "1,5",
        "--tol-f", "100", "--json",
    ]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["verdict"], "conditions-violated");
    // within a factor 10 of the threshold the verdict is inconclusive
    let out = condcov(&[
        "check", "--sigma", s.to_str().unwrap(), "--sigma1", s1.to_str().unwrap(), "--cond", "2,3,4", "--target", "1,5",
        "--tol-f", "1", "--m-grid", "1e3,1e4", "--json",
    ]);
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["empirical_table"].as_array().unwrap().len(), 2);
}

#[test]
fn help_lists_exit_codes() {
    let out = condcov(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Exit codes"));
    for cmd in ["check", "trek", "lemma", "lyapunov", "toeplitz"] {
        assert!(text.contains(cmd));
    }
}
