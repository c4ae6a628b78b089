//! End-to-end runs of the `frobenius` binary: exit codes, output layout and
//! determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frobenius"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    bin().arg(cmd).arg("--config").arg(config).arg("--out").arg(out).args(extra).status().unwrap().code().unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const Z3: &str = r#"{"algebra": {"preset": "Zn", "n": 3}, "seed": 4}"#;
const CORRUPTED: &str = r#"{"algebra": {"table": [
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
    [[0, 0, 1], [1, 0, 0], [0, 0, 1]]], "omega": [1, 0, 0]}}"#;
const CP1: &str = r#"{"manifold": {"preset": "CP1"}, "algebra": {"preset": "Z2", "eps": 1, "mu": 0, "k": 2}, "seed": 9}"#;

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run("algebra-validate", &write_config(d, "ok.json", Z3), &d.join("ok"), &[]), 0);
    assert_eq!(summary(&d.join("ok"))["passed"], true);

    assert_eq!(run("algebra-validate", &write_config(d, "bad.json", CORRUPTED), &d.join("bad"), &[]), 1);
    let s = summary(&d.join("bad"));
    assert_eq!(s["passed"], false);
    assert_eq!(s["details"]["failed"][0], "associativity");

    let unknown = write_config(d, "unknown.json", r#"{"algebra": {"preset": "Zn", "n": 3, "colour": 1}}"#);
    assert_eq!(run("algebra-validate", &unknown, &d.join("unknown"), &[]), 2);
    assert_eq!(run("algebra-validate", &d.join("missing.json"), &d.join("missing"), &[]), 2);
    let mkdv = write_config(
        d,
        "mkdv.json",
        r#"{"algebra": {"preset": "Z2", "eps": 1, "k": 2}, "simulation": {"system": "mkdv", "L": 6.0, "M": 32, "dt": 0.01, "t_end": 0.1}}"#,
    );
    assert_eq!(run("simulate", &mkdv, &d.join("mkdv"), &[]), 2);
    let symbolic_k1 = write_config(d, "k1.json", r#"{"manifold": {"preset": "A2"}, "algebra": {"preset": "Z2", "eps": "eps", "k": 1}}"#);
    assert_eq!(run("tensor", &symbolic_k1, &d.join("k1"), &[]), 2);
}

#[test]
fn refuses_a_non_empty_output_directory_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "z3.json", Z3);
    let out = d.join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("stale.txt"), "x").unwrap();
    assert_eq!(run("algebra-validate", &cfg, &out, &[]), 2);
    assert!(!out.join("summary.json").exists());
    assert_eq!(run("algebra-validate", &cfg, &out, &["--force"]), 0);
    assert!(out.join("summary.json").exists());
}

#[test]
fn outputs_are_deterministic_and_seed_dependent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "cp1.json", CP1);
    assert_eq!(run("tensor", &cfg, &d.join("a"), &[]), 0);
    assert_eq!(run("tensor", &cfg, &d.join("b"), &[]), 0);
    assert_eq!(snapshot(&d.join("a")), snapshot(&d.join("b")));
    assert_eq!(run("tensor", &cfg, &d.join("c"), &["--seed", "10"]), 0);
    let table = |p: &str| fs::read_to_string(d.join(p).join("evaluation_table.csv")).unwrap();
    assert_ne!(table("a"), table("c"));
    assert_eq!(table("a").lines().count(), 51);
}

#[test]
fn simulate_writes_logs_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "mch.json",
        r#"{"algebra": {"preset": "Z2", "eps": 0, "mu": 0, "k": 2},
            "simulation": {"system": "mch", "L": 20.0, "M": 64, "dt": 0.001, "t_end": 0.05, "output_every": 10, "seed": 3}}"#,
    );
    assert_eq!(run("simulate", &cfg, &d.join("a"), &[]), 0);
    assert_eq!(run("simulate", &cfg, &d.join("b"), &[]), 0);
    assert_eq!(snapshot(&d.join("a")), snapshot(&d.join("b")));
    let names: Vec<String> = snapshot(&d.join("a")).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["conserved.csv", "snapshot_final.txt", "snapshot_initial.txt", "summary.json"]);
    let csv = fs::read_to_string(d.join("a/conserved.csv")).unwrap();
    assert!(csv.starts_with("t,casimir_r1,casimir_r2,quadratic_r1"));
    assert_eq!(csv.lines().count(), 1 + 1 + 5);
    assert_eq!(summary(&d.join("a"))["details"]["steps"], 50);
}

#[test]
fn densities_and_wdvv_commands_report_exact_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "a2.json",
        r#"{"manifold": {"preset": "A2"}, "algebra": {"preset": "Z2", "eps": "1/2", "k": 2}, "densities": {"n_max": 2}, "seed": 1}"#,
    );
    assert_eq!(run("densities", &cfg, &d.join("dens"), &[]), 0);
    let doc: Value = serde_json::from_str(&fs::read_to_string(d.join("dens/densities.json")).unwrap()).unwrap();
    assert_eq!(doc["base"]["sigma=1"][0], "t2");
    assert_eq!(doc["base"]["sigma=1"][1], "t1*t2");
    assert_eq!(summary(&d.join("dens"))["details"]["nonzero_recursion_residuals"], 0);
    assert_eq!(run("wdvv", &cfg, &d.join("wdvv"), &[]), 0);
    assert!(summary(&d.join("wdvv"))["max_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        frobenius_lift::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 10);
}
