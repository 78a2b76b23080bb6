use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pmdp_core::encode::parse_qcqp;
use pmdp_core::parser::KeyValueBlock;
use pmdp_core::{parse_model, StateId};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn pmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmdp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn chain() -> String {
    data("chain.pmdp").display().to_string()
}

#[test]
fn synth_ccp_finds_a_certified_valuation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.txt");
    let o = pmdp(&["synth", "ccp", "--model", &chain(), "--spec", "P<=0.3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let kv = KeyValueBlock::parse(&text);
    assert_eq!(kv.get("status"), Some("feasible"));
    assert!(kv.get("iterations").is_some());
    assert!(kv.get("solver_fraction").is_some());
    let v: f64 = kv.get("v").unwrap().parse().unwrap();
    assert!(v * v * (1.0 - v) <= 0.3);
    assert_eq!(fs::read_to_string(&out).unwrap(), format!("v = {}\n", kv.get("v").unwrap()));

    let check = pmdp(&["check", "--model", &chain(), "--spec", "P<=0.3", "--valuation", out.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
}

#[test]
fn synth_reports_exhaustion_above_the_maximum() {
    let o = pmdp(&["synth", "ccp", "--model", &chain(), "--spec", "P>=0.2"]);
    assert_eq!(code(&o), 2);
    let kv = KeyValueBlock::parse(&stdout(&o));
    assert!(matches!(kv.get("status"), Some("exhausted" | "infeasible-instance")));
    assert!(kv.get("v").is_none());
}

#[test]
fn synth_pso_rejects_a_simplex_region() {
    let model = data("simplex.pmdp");
    let o = pmdp(&["synth", "pso", "--model", model.to_str().unwrap(), "--spec", "P>=0.5"]);
    assert_eq!(code(&o), 3);
    assert_eq!(stdout(&o), "status = not-supported\n");
    assert!(!o.stderr.is_empty());
}

#[test]
fn synth_ccp_handles_a_simplex_region() {
    let model = data("simplex.pmdp");
    let o = pmdp(&["synth", "ccp", "--model", model.to_str().unwrap(), "--spec", "P>=0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let kv = KeyValueBlock::parse(&stdout(&o));
    let p: f64 = kv.get("p").unwrap().parse().unwrap();
    let q: f64 = kv.get("q").unwrap().parse().unwrap();
    assert!(p + q <= 1.0);
}

#[test]
fn invalid_threshold_exits_with_one() {
    let o = pmdp(&["synth", "ccp", "--model", &chain(), "--spec", "P<=2"]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
}

#[test]
fn unreadable_model_exits_with_one() {
    let o = pmdp(&["synth", "ccp", "--model", "/nonexistent/model", "--spec", "P<=0.3"]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_model_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pmdp");
    fs::write(&path, "@type pmc\n@parameters v\n@initial a\n@targets b\na b v/2\n").unwrap();
    let o = pmdp(&["check", "--model", path.to_str().unwrap(), "--spec", "P<=0.3", "--valuation", "/dev/null"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("5:"));
}

fn check_at(v: &str, spec: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.txt");
    fs::write(&path, format!("v = {v}\n")).unwrap();
    pmdp(&["check", "--model", &chain(), "--spec", spec, "--valuation", path.to_str().unwrap()])
}

#[test]
fn check_verdicts() {
    let holds = check_at("0.1", "P<=0.1");
    assert_eq!(code(&holds), 0);
    let value: f64 = KeyValueBlock::parse(&stdout(&holds)).get("value").unwrap().parse().unwrap();
    assert!((value - 0.009).abs() < 1e-12);

    let fails = check_at("0.5", "P<=0.1");
    assert_eq!(code(&fails), 2);
    let value: f64 = KeyValueBlock::parse(&stdout(&fails)).get("value").unwrap().parse().unwrap();
    assert!((value - 0.125).abs() < 1e-12);

    let ill = check_at("0", "P<=0.1");
    assert_eq!(code(&ill), 1);
    assert!(String::from_utf8_lossy(&ill.stderr).contains("eps_graph"));
}

#[test]
fn gen_grid_parses() {
    let o = pmdp(&["gen", "grid", "--size", "4", "--params", "8", "--seed", "0"]);
    assert_eq!(code(&o), 0);
    let m = parse_model(&stdout(&o)).unwrap();
    assert_eq!(m.num_states(), 16);
    assert_eq!(m.num_params(), 8);
    assert_eq!(stdout(&pmdp(&["gen", "grid", "--size", "4", "--params", "8", "--seed", "0"])), stdout(&o));
}

#[test]
fn gen_chain_has_closed_form_value() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("c.pmdp");
    let o = pmdp(&["gen", "chain", "--size", "5", "--params", "2", "--out", model.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let m = parse_model(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.num_states(), 7);

    let u = dir.path().join("u.txt");
    fs::write(&u, "v0 = 0.5\nv1 = 0.8\n").unwrap();
    let c = pmdp(&["check", "--model", model.to_str().unwrap(), "--spec", "P<=1", "--valuation", u.to_str().unwrap()]);
    let value: f64 = KeyValueBlock::parse(&stdout(&c)).get("value").unwrap().parse().unwrap();
    // steps alternate v0, v1, v0, v1, v0
    assert!((value - 0.5f64.powi(3) * 0.8f64.powi(2)).abs() < 1e-12);
}

#[test]
fn gen_maze_offers_a_choice() {
    let o = pmdp(&["gen", "maze", "--size", "3", "--params", "2"]);
    let m = parse_model(&stdout(&o)).unwrap();
    assert!((0..m.num_states()).any(|s| m.choices(StateId(s)).len() == 2));
    let pmc = pmdp(&["gen", "maze", "--size", "3", "--params", "2", "--pmc"]);
    let m = parse_model(&stdout(&pmc)).unwrap();
    assert!((0..m.num_states()).all(|s| m.choices(StateId(s)).len() == 1));
}

#[test]
fn dump_matches_encode_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("q.txt");
    let model = data("simplex.pmdp");
    let model = model.to_str().unwrap();
    let synth = pmdp(&["synth", "ccp", "--model", model, "--spec", "P>=0.5", "--dump-qcqp", dump.to_str().unwrap()]);
    assert_eq!(code(&synth), 0);
    let dumped = fs::read_to_string(&dump).unwrap();
    let encoded = stdout(&pmdp(&["encode", "--model", model, "--spec", "P>=0.5"]));
    assert_eq!(dumped, encoded);
    let q = parse_qcqp(&dumped).unwrap();
    assert_eq!(pmdp_core::encode::write_qcqp(&q), dumped);
}

#[test]
fn progress_goes_to_stderr() {
    let o = pmdp(&["synth", "ccp", "--model", &chain(), "--spec", "P<=0.3", "--progress"]);
    assert_eq!(code(&o), 0);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.lines().any(|l| l.starts_with("restart=0 iter=0")));
    assert!(!stdout(&o).contains("restart=0"));
}

#[test]
fn split_and_schedule_flags() {
    let model = chain();
    for extra in [&["--split", "eigen"][..], &["--tau-growth", "1.5"], &["--no-mc-feedback"], &["--no-incremental"]] {
        let mut args = vec!["synth", "ccp", "--model", &model, "--spec", "P<=0.3"];
        args.extend_from_slice(extra);
        let o = pmdp(&args);
        assert_eq!(code(&o), 0, "{extra:?}");
    }
    // usage errors share the exit code of other invalid input
    assert_eq!(code(&pmdp(&["synth", "ccp", "--model", &model, "--spec", "P<=0.3", "--split", "other"])), 1);
    assert_eq!(code(&pmdp(&["--help"])), 0);
}
