use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparsereg::io::{read_path, read_precision};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsereg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, kind: &str, n: usize, d: usize, seed: u64) -> PathBuf {
    let out = dir.path().join(format!("{kind}_{seed}.csv"));
    let o = run(&[
        "simulate", "--kind", kind, "--n", &n.to_string(), "--d", &d.to_string(), "--seed",
        &seed.to_string(), "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn regress_writes_verified_path() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "regression", 60, 30, 4);
    let output = dir.path().join("path.csv");
    let o = run(&["regress", "--method", "sqrt", "--nlambda", "10", "--input", s(&input), "--output", s(&output)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&output).unwrap();
    assert!(text.contains("# method=sqrt"));
    assert!(text.lines().any(|l| l == "lambda_index,lambda,coef_index,value"));
    let record = read_path(text.as_bytes(), 30).unwrap();
    assert_eq!(record.lambdas.len(), 10);
    assert!(record.coefficients[0].is_zero(), "largest λ gives the zero fit");
    assert!(!record.coefficients[9].is_zero());
    assert!(!dir.path().join("path.csv.failures.csv").exists());
}

#[test]
fn regress_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "regression", 50, 40, 9);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["regress", "--method", "lad", "--nlambda", "8", "--input", s(&input), "--output", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn regress_named_response_and_lq() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "regression", 40, 10, 2);
    let output = dir.path().join("p.csv");
    let o = run(&[
        "regress", "--method", "lq", "--q", "1.5", "--response", "y", "--lambdas", "0.5,0.3,0.2", "--input",
        s(&input), "--output", s(&output),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = read_path(fs::read(&output).unwrap().as_slice(), 10).unwrap();
    assert_eq!(record.lambdas, vec![0.5, 0.3, 0.2]);
}

#[test]
fn clime_on_independent_data_is_near_diagonal() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("independent.csv");
    let o = run(&[
        "simulate", "--kind", "precision", "--n", "2000", "--d", "4", "--rho-corr", "0", "--seed", "5", "--output",
        s(&input),
    ]);
    assert!(o.status.success());
    let output = dir.path().join("omega.csv");
    let o = run(&["precision", "--method", "clime", "--lambdas", "0.05", "--input", s(&input), "--output", s(&output)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record = read_precision(fs::read(&output).unwrap().as_slice(), 4).unwrap();
    let omega = &record.matrices[0];
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((omega.get(i, j) - target).abs() < 0.15, "({i},{j}) = {}", omega.get(i, j));
        }
    }
}

#[test]
fn tiger_writes_symmetric_upper_triangle() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "precision", 100, 8, 3);
    let output = dir.path().join("omega.csv");
    let o = run(&["precision", "--method", "tiger", "--input", s(&input), "--output", s(&output)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&output).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (row, col): (usize, usize) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        assert!(row <= col);
    }
    let record = read_precision(text.as_bytes(), 8).unwrap();
    let omega = record.matrices[0].to_dense();
    assert_eq!(omega, omega.transpose());
    assert!((0..8).all(|i| omega[(i, i)] > 0.0));
}

#[test]
fn bench_reports_one_row_per_dimension() {
    let o = run(&["bench", "--method", "sqrt", "--dims", "375,750", "--replications", "1", "--nlambda", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sqrt,375,"));
    assert!(lines[2].starts_with("sqrt,750,"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "regression", 30, 5, 1);
    let out = dir.path().join("o.csv");
    let usage = run(&[
        "regress", "--method", "sqrt", "--lambda-min-ratio", "0.1", "--lambda-min-value", "0.2", "--input",
        s(&input), "--output", s(&out),
    ]);
    assert_eq!(usage.status.code(), Some(1));
    let bad_q = run(&["regress", "--method", "lq", "--q", "2.5", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(bad_q.status.code(), Some(1));
    let grid = run(&["regress", "--method", "sqrt", "--lambdas", "0.1,0.2", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(grid.status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "a,b,y\n1,2,3\n2,NA,1\n3,1,2\n4,5,\n").unwrap();
    let tiger = run(&["precision", "--method", "tiger", "--input", s(&missing), "--output", s(&out)]);
    assert_eq!(tiger.status.code(), Some(2));
    let absent = run(&["regress", "--method", "sqrt", "--input", "/nonexistent.csv", "--output", s(&out)]);
    assert_eq!(absent.status.code(), Some(2));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unverified_points_produce_manifest() {
    let dir = TempDir::new().unwrap();
    let input = simulate(&dir, "regression", 60, 30, 4);
    let out = dir.path().join("o.csv");
    let o = run(&[
        "regress", "--method", "lad", "--nlambda", "6", "--max-iter", "1", "--no-refine", "--input", s(&input), "--output",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists(), "partial output is kept");
    let manifest = fs::read_to_string(dir.path().join("o.csv.failures.csv")).unwrap();
    assert!(manifest.starts_with("lambda_index,lambda,kkt_residual,termination,reason"));
    assert!(manifest.lines().count() > 1);
}
