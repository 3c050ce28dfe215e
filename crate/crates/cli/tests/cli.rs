use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cubiclines::certificate;
use cubiclines::forms::{FormJson, RatForm};
use serde_json::Value;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cubiclines"))
}

fn run(args: &[&str]) -> Output {
    cli().args(args).env_remove("CUBICLINES_SEED").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_form(dir: &Path, name: &str, f: &RatForm) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&FormJson::from_rational(f)).unwrap()).unwrap();
    path
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(run(&["verify-counterexample", "--p", "7"]).status.code(), Some(3));
    assert_eq!(run(&["verify-counterexample"]).status.code(), Some(3));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(3));
    assert_eq!(run(&["lines-fp", "--form", "/nonexistent.json", "--p", "2"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let f = write_form(dir.path(), "f.json", &RatForm::fermat(5));
    assert_eq!(run(&["lines-fp", "--form", s(&f), "--p", "4"]).status.code(), Some(3));
    // too few variables for the 22-variable pipeline
    assert_eq!(run(&["find-line-qp", "--form", s(&f), "--p", "5"]).status.code(), Some(3));
    assert_eq!(run(&["find-line-qp", "--form", s(&f), "--p", "5", "--min-vars", "17"]).status.code(), Some(3));
}

#[test]
fn certificate_passes_and_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = run(&["verify-counterexample", "--p", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let cert: certificate::Certificate = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cert.verdict, certificate::Outcome::Pass);
    assert!(certificate::replay(&cert).unwrap());
}

#[test]
fn certificate_is_independent_of_thread_count() {
    let a = json(&run(&["--threads", "1", "verify-counterexample", "--p", "3"]));
    let b = json(&run(&["--threads", "4", "verify-counterexample", "--p", "3"]));
    assert_eq!(a["sub_checks"], b["sub_checks"]);
    assert_eq!(a["verdict"], "pass");
}

#[test]
fn finite_field_scans() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_form(dir.path(), "fermat.json", &RatForm::fermat(5));
    let o = run(&["lines-fp", "--form", s(&f), "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["lines_scanned"], 155);
    assert!(v["lines_found"].as_u64().unwrap() > 0);

    let g = write_form(dir.path(), "g.json", &certificate::ternary_form(3).unwrap());
    let v = json(&run(&["zeros-fp", "--form", s(&g), "--p", "3"]));
    assert_eq!(v["points_scanned"], 13);
    assert_eq!(v["zeros_found"], 0);
}

#[test]
fn point_search_and_seed_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_form(dir.path(), "fermat.json", &RatForm::fermat(10));
    let o = cli().args(["find-point-qp", "--form", s(&f), "--p", "5", "--prec", "20"]).env("CUBICLINES_SEED", "7").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "found");
    assert_eq!(v["seed"], 7);
    assert!(v["value_valuation"].as_i64().unwrap() >= 20);
    // an explicit flag wins over the environment
    let o = cli().args(["find-point-qp", "--form", s(&f), "--p", "5", "--seed", "3"]).env("CUBICLINES_SEED", "7").output().unwrap();
    assert_eq!(json(&o)["seed"], 3);
}

#[test]
fn line_search_on_fermat_forms() {
    let dir = tempfile::tempdir().unwrap();
    let f22 = write_form(dir.path(), "f22.json", &RatForm::fermat(22));
    let o = run(&["find-line-qp", "--form", s(&f22), "--p", "5", "--prec", "30"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["status"], "verified");
    assert!(v["line"]["verified_precision"].as_i64().unwrap() >= 25);

    let f16 = write_form(dir.path(), "f16.json", &RatForm::fermat(16));
    let v = json(&run(&["find-line-qp", "--form", s(&f16), "--p", "23", "--min-vars", "16"]));
    assert_eq!(v["status"], "verified");
}

#[test]
fn real_geometry_commands() {
    let dir = tempfile::tempdir().unwrap();
    let f6 = write_form(dir.path(), "f6.json", &RatForm::fermat(6));
    let o = run(&["base-point", "--form", s(&f6), "--trials", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["report"]["signature"]["rank"], 6);

    let point = write_json(dir.path(), "x.json", &serde_json::json!([1, 1, 1, -1, -1, -1]));
    let o = run(&["reduce-system", "--form", s(&f6), "--point", s(&point)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["audit"]["sigma_at_least_2"], true);
    let bad = write_json(dir.path(), "bad.json", &serde_json::json!([1, 1]));
    assert_eq!(run(&["reduce-system", "--form", s(&f6), "--point", s(&bad)]).status.code(), Some(3));

    let f3 = write_form(dir.path(), "f3.json", &RatForm::fermat(3));
    let lp = write_json(dir.path(), "loop.json", &serde_json::json!({"kind": "circle", "u": [1.0, 0.0], "v": [0.0, 1.0]}));
    let o = run(&["track-loop", "--form", s(&f3), "--loop", s(&lp), "--steps", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["winding"], serde_json::json!([1]));
    assert!(!v["antipodal_witness"].is_null());

    let y = write_json(dir.path(), "y.json", &serde_json::json!([1, 0, 0, 0, 0, 0]));
    let z = write_json(dir.path(), "z.json", &serde_json::json!([0, "1/2", 0, 0, 0, 0]));
    let o = run(&["mw-system", "--form", s(&f6), "--y", s(&y), "--z", s(&z), "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o)["quadric"]["monomials"].is_array());
}
