//! End-to-end runs of every subcommand through [`run_with`], with scenario
//! files in a temporary directory.

use std::path::{Path, PathBuf};

use tempfile::TempDir;

use super::run_with;

struct Output {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let (mut out, mut err) = (vec![], vec![]);
    let code = run_with(std::iter::once("hullconc").chain(args.iter().copied()), &mut out, &mut err);
    Output { code, stdout: out, stderr: String::from_utf8(err).unwrap() }
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"{"alphabet":[2,2,3],
    "marginals":[[0.5,0.5],[0.3,0.7],[0.2,0.3,0.5]],
    "A":[[0,1,2],[1,1,0]],
    "psi":{"family":"psi_c","c":1.0},
    "gamma":{"family":"c_log_inv","c":1.0}}"#;

#[test]
fn full_space_passes_with_zero_margins() {
    let dir = tempfile::tempdir().unwrap();
    let all: Vec<String> = (0..2).flat_map(|a| (0..3).map(move |b| format!("[{a},{b}]"))).collect();
    let body = format!(r#"{{"alphabet":[2,3],"A":[{}],"checks":["exp_moment","tail_bound"]}}"#, all.join(","));
    let f = write(&dir, "full.json", &body);
    let out = run(&["verify", "--scenario", s(&f)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["scenarios"][0]["checks"].as_array().unwrap();
    let exp = checks.iter().find(|c| c["name"] == "exp_moment").unwrap();
    assert!(exp["margin"].as_f64().unwrap().abs() < 1e-12);
    // D = 0 everywhere, so P{D ≥ 0} = 1 and the t = 0 row is an equality.
    let t0 = checks.iter().find(|c| c["name"] == "tail_bound" && c["parameter"].as_f64() == Some(0.0)).unwrap();
    assert!(t0["margin"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // One coordinate, A = {0}: (1/2)^{1/2}·(1/2 + 3/2) = √2 > 1 for ψ_0.5.
    let f = write(&dir, "bad.json", r#"{"alphabet":[2],"A":[[0]],"c_values":[0.5],"checks":["fpsic_bound"]}"#);
    let out = run(&["verify", "--scenario", s(&f), "--format", "csv"]);
    assert_eq!(out.code, 1);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fpsic_bound"));
    assert!(text.contains("violation"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(&dir, "m.json", "{\n  \"alphabet\": [2,\n");
    let out = run(&["verify", "--scenario", s(&malformed)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("line"));

    let empty = write(&dir, "e.json", r#"{"alphabet":[2],"A":[]}"#);
    assert_eq!(run(&["verify", "--scenario", s(&empty)]).code, 2);
    assert_eq!(run(&["distance", "--scenario", s(&empty), "--x", "0"]).code, 2);

    let ok = write(&dir, "ok.json", SMALL);
    assert_eq!(run(&["verify", "--scenario", s(&ok), "--checks", "monte_carlo"]).code, 2);
    assert_eq!(run(&["verify", "--scenario", s(&ok), "--checks", "bogus"]).code, 2);
    assert_eq!(run(&["verify"]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["distance", "--scenario", s(&ok), "--x", "0,1"]).code, 2);
}

#[test]
fn monte_carlo_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL.replace("\"gamma\"", "\"mc\":{\"samples\":2000},\"gamma\"");
    let f = write(&dir, "mc.json", &body);
    let args = ["verify", "--scenario", s(&f), "--checks", "monte_carlo"];
    assert_eq!(run(&args).code, 2);
    let out = run(&[&args[..], &["--seed", "3"]].concat());
    assert_eq!(out.code, 0, "{}", out.stderr);
}

#[test]
fn distance_single_vertex_is_sqrt_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "one.json", r#"{"alphabet":[2,2,2],"A":[[1,1,1]]}"#);
    let out = run(&["distance", "--scenario", s(&f), "--x", "0,0,0"]);
    assert_eq!(out.code, 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-12);
    assert!((v["f_psi"][0]["value"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let w: Vec<f64> = v["certificate"]["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for wi in w {
        assert!((wi - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn distance_inside_set_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "s.json", SMALL);
    let out = run(&["distance", "--scenario", s(&f), "--x", "0,1,2"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d"].as_f64(), Some(0.0));
    assert_eq!(v["f_psi"][0]["value"].as_f64(), Some(0.0));
    assert!(v["certificate"].is_null());
}

#[test]
fn psi_table_columns() {
    let out = run(&["psi-table", "--c", "0.5,1,2", "--steps", "200"]);
    assert_eq!(out.code, 0);
    let mut rdr = csv::Reader::from_reader(&out.stdout[..]);
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["theta", "c", "psi_closed", "psi_series", "lower_bound", "second_deriv_formula", "second_deriv_fd"]
    );
    let rows: Vec<Vec<f64>> =
        rdr.records().map(|r| r.unwrap().iter().map(|f| f.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 600);
    for r in &rows {
        if r[0] == 0.0 {
            assert_eq!((r[2], r[3], r[4]), (0.0, 0.0, 0.0));
        }
        assert!((r[2] - r[3]).abs() <= 1e-10);
        assert!(r[4] <= r[2]);
    }
}

#[test]
fn sweep_tail_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "s.json", SMALL);
    let out_path = dir.path().join("sweep.csv");
    let out = run(&["sweep", "--scenario", s(&f), "--grid", "t=0:3:0.25", "--out", s(&out_path)]);
    assert_eq!(out.code, 0);
    let mut rdr = csv::Reader::from_path(&out_path).unwrap();
    let rows: Vec<Vec<f64>> =
        rdr.records().map(|r| r.unwrap().iter().map(|f| f.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0][2], 1.0);
    for w in rows.windows(2) {
        assert!(w[1][2] < w[0][2]);
    }
    assert!(rows.iter().all(|r| r[3] >= 0.0));

    let out = run(&["sweep", "--scenario", s(&f), "--grid", "c=1,2"]);
    assert_eq!(out.code, 0);
    assert_eq!(run(&["sweep", "--scenario", s(&f), "--grid", "q=1,2"]).code, 2);
}

#[test]
fn suite_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, jobs) in [(&a, "1"), (&b, "4")] {
        let o = run(&["verify", "--suite", "5", "--seed", "9", "--jobs", jobs, "--out", s(out)]);
        assert_eq!(o.code, 0, "{}", o.stderr);
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["scenarios"].as_array().unwrap().len(), 5);
}

#[test]
fn floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "s.json", SMALL);
    let out = run(&["verify", "--scenario", s(&f), "--checks", "exp_moment", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    let lhs = row.split(',').nth(3).unwrap();
    let mantissa = lhs.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{lhs}");
}
