//! End-to-end runs of the `pmc` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary launches")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const INTERVAL_CFG: &str = "[grid]\nkind = interval\nnodes = 41\n\n[datum]\nexpr = 12*x*(1-x)\n";

#[test]
fn thresholds_prints_both_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pmc(tmp.path(), &["thresholds", "--N", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("4.8360"), "{text}");
    assert!(text.contains("3.2240"), "{text}");
}

#[test]
fn radial_verify_reports_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pmc(
        tmp.path(),
        &["radial-verify", "--alpha", "1", "--N", "3", "--rmin", "0.05", "--nodes", "2001"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("max residual").count(), 2, "{text}");
    let order: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("order "))
        .expect("order line")
        .parse()
        .unwrap();
    assert!((1.8..=2.2).contains(&order), "order {order}");
}

#[test]
fn missing_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pmc(tmp.path(), &["solve", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.cfg"));
}

#[test]
fn unknown_config_keys_are_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "[grid]\nkind = interval\nnodez = 41\n").unwrap();
    let out = pmc(tmp.path(), &["solve", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nodez"), "{}", stderr(&out));
}

#[test]
fn solve_writes_deterministic_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), INTERVAL_CFG).unwrap();
    for dir in ["a", "b"] {
        let out = pmc(tmp.path(), &["solve", "--config", "run.cfg", "--out", dir]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let ua = fs::read(tmp.path().join("a/u.csv")).unwrap();
    let ub = fs::read(tmp.path().join("b/u.csv")).unwrap();
    assert!(!ua.is_empty());
    assert_eq!(ua, ub, "repeat runs must be bit-identical");
    let manifest = fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"manifest_version\": 1"), "{manifest}");
    assert!(manifest.contains("\"detachment\""));
}

#[test]
fn fixed_exponent_must_exceed_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), INTERVAL_CFG).unwrap();
    let out = pmc(tmp.path(), &["solve", "--config", "run.cfg", "--p", "0.9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pmc(tmp.path(), &["solve", "--config", "run.cfg", "--p", "1.5", "--out", "p"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn continuation_records_the_step_trace() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), INTERVAL_CFG).unwrap();
    let out = pmc(tmp.path(), &["continuation", "--config", "run.cfg", "--out", "c"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let steps = fs::read_to_string(tmp.path().join("c/steps.csv")).unwrap();
    let mut lines = steps.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,newton_iterations,final_residual,sup_norm,p_gradient_term,bv_seminorm,energy"
    );
    assert!(lines.count() >= 2, "expected several continuation rows");
}

#[test]
fn evolve_writes_one_file_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), INTERVAL_CFG).unwrap();
    let out = pmc(
        tmp.path(),
        &["evolve", "--config", "run.cfg", "--out", "e", "--steps", "3", "--lambda", "0.1"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for k in 0..=3 {
        assert!(tmp.path().join(format!("e/u_step_{k:03}.csv")).exists(), "step {k}");
    }
    let manifest = fs::read_to_string(tmp.path().join("e/manifest.json")).unwrap();
    assert!(manifest.contains("\"monitors\""));
}

#[test]
fn scan_finds_the_constant_datum_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "[grid]\nkind = rectangle\nnx = 17\nny = 17\n\n[datum]\nconstant = 10\n",
    )
    .unwrap();
    let out = pmc(
        tmp.path(),
        &["scan", "--config", "run.cfg", "--out", "s", "--jobs", "3"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("2.5000"), "{}", stdout(&out));
    let rows = fs::read_to_string(tmp.path().join("s/rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 21, "header plus twenty family rows");
}

#[test]
fn truncation_chain_runs_on_an_unbounded_datum() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.cfg"),
        "[grid]\nkind = interval\na = -1\nnodes = 21\n\n\
         [datum]\nexpr = 1/sqrt(abs(x)+0.01)\nclass = l1\n",
    )
    .unwrap();
    let out = pmc(tmp.path(), &["l1", "--config", "run.cfg", "--out", "t"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = fs::read_to_string(tmp.path().join("t/rows.csv")).unwrap();
    assert!(rows.starts_with("cap,"), "{rows}");
    assert!(rows.lines().count() >= 2);
}
