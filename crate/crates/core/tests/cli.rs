use std::path::Path;
use std::process::{Command, Output};

use fklab::report::{BinaryTable, Csv, Report, Status};

fn fklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fklab")).args(args).env_remove("FKLAB_WORKERS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn kernel_prints_one_band_row() {
    let o = fklab(&["kernel", "--preset", "killed-stable", "--t", "0.5", "--x", "0", "--y", "0.3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = Csv::parse(&stdout(&o)).unwrap();
    assert_eq!(csv.header, ["t", "x", "y", "q", "psi", "lower", "upper"]);
    assert_eq!(csv.rows.len(), 1);
    let r = &csv.rows[0];
    assert!(r[5] < r[3] * r[4] && r[3] * r[4] < r[6]);
}

#[test]
fn kernel_grid_is_a_product() {
    let o = fklab(&["kernel", "--t", "0.1,1,2", "--x", "0", "1", "--y", "0.5"]);
    assert_eq!(code(&o), 0);
    let csv = Csv::parse(&stdout(&o)).unwrap();
    assert_eq!(csv.rows.len(), 6);
    // beyond t = 1 the band is not asserted
    assert!(csv.rows[4][5].is_nan());
}

#[test]
fn usage_errors_exit_two() {
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), r#"{"series": {"nx": "many"}}"#).unwrap();
    let o = fklab(&["kernel", "--config", bad.path().to_str().unwrap(), "--t", "1", "--x", "0", "--y", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("series.nx"), "{}", stderr(&o));

    assert_eq!(code(&fklab(&["kernel", "--alpha", "2.5", "--t", "1", "--x", "0", "--y", "0"])), 2);
    assert_eq!(code(&fklab(&["kernel", "--preset", "killed-stable", "--t", "1", "--x", "5", "--y", "0"])), 2);
    assert_eq!(code(&fklab(&["frobnicate"])), 2);
    assert_eq!(code(&fklab(&["certify", "--ineq", "no-such-thing"])), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"alpha": 1.5, "kernel": {"times": [0.5], "x": [[0.0]], "y": [[1.0]]}}"#).unwrap();
    let out = dir.path().join("out");
    let o = fklab(&["kernel", "--config", cfg.to_str().unwrap(), "--alpha", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = Report::read(&out.join("kernel.json")).unwrap();
    assert_eq!(r.config["model"]["params"]["alpha"], 0.5);
    // defaults are echoed too
    assert!(r.config["model"]["params"]["c0"].is_number());
    assert_eq!(r.config["kernel"]["times"][0], 0.5);
    assert!(out.join("kernel.csv").exists());
}

#[test]
fn certify_ppp_passes_below_the_constant() {
    let o = fklab(&["certify", "--ineq", "ppp", "--d", "1", "--alpha", "1", "--n", "1000000", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = Report::parse(&stdout(&o)).unwrap();
    assert_eq!(r.status, Status::Pass);
    let rep = &r.body["reports"][0];
    assert_eq!(rep["violation_count"], 0);
    assert!(rep["max_ratio"].as_f64().unwrap() < 256.0);
    assert_eq!(rep["stated_constant"], 256.0);
}

#[test]
fn certify_all_lists_what_does_not_apply() {
    let o = fklab(&["certify", "--ineq", "all", "--d", "2", "--n", "2000", "--budget", "0", "--probes", "0", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = Report::parse(&stdout(&o)).unwrap();
    let skipped: Vec<&str> = r.body["skipped"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert!(skipped.contains(&"measure-3p"), "{skipped:?}");
}

#[test]
fn series_beyond_the_horizon_names_t1() {
    let o = fklab(&["series", "--preset", "killed-stable", "--mu", "const:1", "--c1", "2", "--c4", "2", "--t-max", "0.5"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("t1 = "), "{}", stderr(&o));
}

#[test]
fn series_with_gamma_needs_boundary_constants() {
    let o = fklab(&["series", "--preset", "killed-stable", "--mu", "const:1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("c1"));
}

#[test]
fn compare_massless_relativistic_is_a_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fklab(&["compare", "--preset", "relativistic", "--m", "0", "--paths", "20000", "--nx", "11", "--out", out]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let r = Report::read(&dir.path().join("compare.json")).unwrap();
    assert_eq!(r.body["comparison"]["passthrough"], true);
    assert_eq!(r.config["model"]["mu"]["kind"], "zero");
}

#[test]
fn series_outputs_and_report_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fklab(&["series", "--preset", "killed-stable", "--nx", "9", "--n-times", "2", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = BinaryTable::read(&dir.path().join("series.fklt")).unwrap();
    assert_eq!(table.block("times").unwrap().len(), 2);
    let csv = Csv::parse(&std::fs::read_to_string(dir.path().join("series.csv")).unwrap()).unwrap();
    assert_eq!(csv.header[..3], ["t", "x", "y"]);
    for f in ["series.json", "series.fklt"] {
        let o = fklab(&["report", dir.path().join(f).to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(!stdout(&o).is_empty());
    }
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, r#"{"schema": "other/v0", "command": "x", "config": {}, "status": "pass", "body": {}}"#).unwrap();
    assert_eq!(code(&fklab(&["report", junk.to_str().unwrap()])), 2);
}

fn run_into(dir: &Path, args: &[&str]) {
    let mut a = args.to_vec();
    let out = dir.to_str().unwrap();
    a.extend(["--out", out]);
    let o = fklab(&a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["mc", "--t", "0.2", "--paths", "5000", "--bins", "8", "--seed", "11"];
    run_into(a.path(), &args);
    run_into(b.path(), &args);
    for f in ["mc.csv", "mc.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn worker_count_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_fklab"))
        .args(["kernel", "--t", "1", "--x", "0", "--y", "0", "--json"])
        .env("FKLAB_WORKERS", "1")
        .output()
        .unwrap();
    let r = Report::parse(&String::from_utf8_lossy(&o.stdout)).unwrap();
    assert_eq!(r.config["workers"], 1);
}

#[test]
fn in_process_run_matches_binary() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let c = fklab::cli::run(["fklab", "kernel", "--t", "1", "--x", "0", "--y", "2"], &mut out, &mut err);
    assert_eq!(c, 0);
    let bin = fklab(&["kernel", "--t", "1", "--x", "0", "--y", "2"]);
    assert_eq!(out, bin.stdout);
}
