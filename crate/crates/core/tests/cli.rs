//! End-to-end tests of the `k3mirror` binary: exit codes, report layout,
//! JSON round trips and golden reports.
//!
//! Golden files live in `tests/golden`. Reports are compared with
//! `timing_ms` removed. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Runs the binary inside `dir` so that input paths stay relative.
fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_k3mirror")).current_dir(dir).args(args).output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_in(&data_dir(), args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn strip_timing(mut v: Value) -> Value {
    if let Some(m) = v.as_object_mut() {
        m.remove("timing_ms");
    }
    v
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).expect("golden file written");
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}; rerun with UPDATE_GOLDEN=1 after reviewing");
}

fn check_golden_json(name: &str, o: &Output) {
    let v = strip_timing(report(o));
    check_golden(name, &(serde_json::to_string_pretty(&v).expect("serializes") + "\n"));
}

// ---------------------------------------------------------------------------
// Exit codes

#[test]
fn verified_reports_exit_zero() {
    let o = run(&["lattice", "info", "--name", "H+E8+E8"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["verdict"], "verified");
    assert_eq!(r["tool_version"], env!("CARGO_PKG_VERSION"));
    assert!(r["timing_ms"].is_u64());
    assert_eq!(r["command"], serde_json::json!(["lattice", "info", "--name", "H+E8+E8"]));
}

#[test]
fn refuted_reports_exit_one() {
    let o = run(&["fibration", "check-allowable", "--config", "degree_two.config.json", "--split", "degree_two.split.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["mirror", "check", "--degeneration", "degree_two.degeneration.json", "--fibration", "mismatch.fibration.json"]);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["verdict"], "refuted");
    assert_eq!(r["result"]["factors"]["degrees_match"], false);
    let o = run(&["pseudo", "classify", "--file", "quadric_pair.json"]);
    assert_eq!(code(&o), 0);
    let two = tempdir().unwrap();
    fs::write(two.path().join("a2.json"), r#"{"words": [[1, 0], [1, 0]]}"#).unwrap();
    let o = run_in(two.path(), &["pseudo", "classify", "--file", "a2.json"]);
    assert_eq!(code(&o), 1);
    assert_eq!(report(&o)["result"]["quasi_del_pezzo"], false);
}

#[test]
fn bounded_search_without_result_exits_two() {
    let o = run(&["fibration", "search-framings", "--types", "I1,I1,I1", "--target", "[[1,-9],[0,1]]", "--max-word-len", "0"]);
    assert_eq!(code(&o), 2);
    let r = report(&o);
    assert_eq!(r["verdict"], "unknown");
    assert_eq!(r["result"]["solutions"], serde_json::json!([]));
    let o = run(&["fibration", "search-framings", "--types", "I1,I1,I1", "--target", "[[1,-9],[0,1]]", "--max-word-len", "4"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn usage_errors_exit_sixty_four() {
    for args in [
        vec!["lattice"],
        vec!["no-such-command"],
        vec!["lattice", "info", "--name", "Q7"],
        vec!["pseudo", "classify", "--file", "malformed.json"],
        vec!["pseudo", "classify", "--file", "missing.json"],
        vec!["fibration", "search-framings", "--types", "I0", "--target", "[[1,0],[0,1]]"],
        vec!["fibration", "search-framings", "--types", "I1", "--target", "not json"],
        vec!["--format", "yaml", "lattice", "info", "--name", "E8"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 64, "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?} wrote a report");
        assert!(!o.stderr.is_empty(), "{args:?} gave no message");
    }
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn class_outside_the_glued_lattice_is_a_usage_error() {
    let dir = tempdir().unwrap();
    for f in ["chain3.json", "chain21.json"] {
        fs::copy(data_dir().join(f), dir.path().join(f)).unwrap();
    }
    let o = run_in(dir.path(), &["tyurin", "build", "--pair1", "chain3.json", "--pair2", "chain21.json", "--out", "model.json"]);
    assert_eq!(code(&o), 0);
    // (1, 0, …, 0) pairs nontrivially with the canonical classes.
    let mut v = vec![0; 20];
    v[0] = 1;
    fs::write(dir.path().join("bad.json"), serde_json::json!({ "l": { "factor_classes": [v] } }).to_string()).unwrap();
    let o = run_in(dir.path(), &["tyurin", "check-polarisation", "--model", "model.json", "--lhat", "bad.json"]);
    assert_eq!(code(&o), 64, "{}", String::from_utf8_lossy(&o.stdout));
}

// ---------------------------------------------------------------------------
// Round trips

#[test]
fn build_report_is_accepted_as_a_model() {
    let dir = tempdir().unwrap();
    for f in ["chain3.json", "chain21.json", "hyperplane_l.json"] {
        fs::copy(data_dir().join(f), dir.path().join(f)).unwrap();
    }
    let o = run_in(dir.path(), &["tyurin", "build", "--pair1", "chain3.json", "--pair2", "chain21.json", "--out", "model.json"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let built: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(built["verdict"], "verified");
    assert_eq!(built["result"]["summary"]["degree"], "9");
    let o = run_in(dir.path(), &["tyurin", "check-polarisation", "--model", "model.json", "--lhat", "hyperplane_l.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&o);
    assert_eq!(r["result"]["l"]["rank"], 1);
    assert_eq!(r["result"]["coupling"]["order"], "3");
    assert!(r["inputs"]["model.json"].as_str().unwrap().len() == 64);
    // Rebuilding from the embedded specification gives the same summary.
    let spec = &built["result"];
    fs::write(dir.path().join("p1.json"), spec["pair1"].to_string()).unwrap();
    fs::write(dir.path().join("p2.json"), spec["pair2"].to_string()).unwrap();
    let again = run_in(dir.path(), &["tyurin", "build", "--pair1", "p1.json", "--pair2", "p2.json"]);
    assert_eq!(report(&again)["result"]["summary"], built["result"]["summary"]);
}

#[test]
fn exported_instances_check_in_both_modes() {
    let dir = tempdir().unwrap();
    let o = run_in(dir.path(), &["mirror", "dht-suite", "--export", "instances"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["result"]["verified"], "4/4");
    let mut stems: Vec<String> = fs::read_dir(dir.path().join("instances"))
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_suffix(".degeneration.json").map(str::to_string))
        .collect();
    stems.sort();
    assert_eq!(stems.len(), 4);
    let inst = dir.path().join("instances");
    for stem in &stems {
        let d = format!("{stem}.degeneration.json");
        let f = format!("{stem}.fibration.json");
        let w = format!("{stem}.witness.json");
        let auto = run_in(&inst, &["mirror", "check", "--degeneration", &d, "--fibration", &f, "--auto"]);
        assert_eq!(code(&auto), 0, "{stem} auto: {}", String::from_utf8_lossy(&auto.stdout));
        let wit = run_in(&inst, &["mirror", "check", "--degeneration", &d, "--fibration", &f, "--witness", &w]);
        assert_eq!(code(&wit), 0, "{stem} witness: {}", String::from_utf8_lossy(&wit.stdout));
        assert_eq!(report(&wit)["inputs"].as_object().unwrap().len(), 3);
    }
}

#[test]
fn handwritten_degree_two_pair_verifies() {
    let o = run(&["mirror", "check", "--degeneration", "degree_two.degeneration.json", "--fibration", "degree_two.fibration.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&o);
    assert_eq!(r["result"]["mirror_lattice"]["rank"], 19);
    assert_eq!(r["result"]["mirror_lattice"]["discriminant"], serde_json::json!(["2"]));
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempdir().unwrap();
    let o = run_in(dir.path(), &["lattice", "info", "--name", "D16", "--out", "d16.json"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let written: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d16.json")).unwrap()).unwrap();
    let direct = report(&run(&["lattice", "info", "--name", "D16"]));
    assert_eq!(written["result"], direct["result"]);
    assert_eq!(written["result"]["root_system"], "D16");
}

// ---------------------------------------------------------------------------
// Golden reports

#[test]
fn golden_lattice_info() {
    check_golden_json("lattice_info_h_e8_e8.json", &run(&["lattice", "info", "--name", "H+E8+E8"]));
}

#[test]
fn golden_pseudo_classify() {
    check_golden_json("pseudo_classify_p2_words.json", &run(&["pseudo", "classify", "--file", "p2_words.json"]));
    check_golden_json("pseudo_classify_quadric_pair.json", &run(&["pseudo", "classify", "--file", "quadric_pair.json"]));
}

#[test]
fn golden_tyurin_build() {
    check_golden_json("tyurin_build_degree_nine.json", &run(&["tyurin", "build", "--pair1", "chain3.json", "--pair2", "chain21.json"]));
}

#[test]
fn golden_fibration_reports() {
    check_golden_json("fibration_build_degree_two.json", &run(&["fibration", "build", "--config", "degree_two.config.json"]));
    check_golden_json(
        "fibration_check_allowable_degree_two.json",
        &run(&["fibration", "check-allowable", "--config", "degree_two.config.json", "--split", "degree_two.split.json"]),
    );
}

#[test]
fn golden_text_format() {
    let o = run(&["--format", "text", "lattice", "info", "--name", "A2+<4>"]);
    assert_eq!(code(&o), 0);
    let text: String = String::from_utf8(o.stdout).unwrap().lines().filter(|l| !l.starts_with("timing_ms:")).map(|l| format!("{l}\n")).collect();
    check_golden("lattice_info_a2_4.txt", &text);
}
