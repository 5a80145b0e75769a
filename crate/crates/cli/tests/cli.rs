use std::path::{Path, PathBuf};
use std::process::Command;

use modewitness::recipe::Recipe;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_modewitness"));
    c.env("MODEWITNESS_WORKERS", "2");
    c
}

fn recipes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes")
}

fn run(args: &[&str]) -> std::process::Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Data rows of a CSV written by the tool, as numbers.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_fixture_parses() {
    let mut n = 0;
    for entry in std::fs::read_dir(recipes()).unwrap() {
        let p = entry.unwrap().path();
        Recipe::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn vacuum_scan_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("vacuum.json");
    run(&["scan", "--recipe", s(&r), "--out", s(dir.path()), "--points", "7"]);
    let (header, rows) = csv_rows(&dir.path().join("scan.csv"));
    assert_eq!(header, ["theta", "phi", "E_N1", "E_N2"]);
    assert_eq!(rows.len(), 49);
    for r in rows {
        assert!(r[2].abs() < 1e-6 && r[3].abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn one_photon_scan_is_positive() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("fig5.json");
    run(&["scan", "--recipe", s(&r), "--out", s(dir.path()), "--points", "9", "--order", "1"]);
    let (_, rows) = csv_rows(&dir.path().join("scan.csv"));
    assert!(rows.iter().all(|r| r[2] > 1e-6));
}

#[test]
fn two_photon_scan_vanishes_on_borders() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("fig6.json");
    run(&["scan", "--recipe", s(&r), "--out", s(dir.path()), "--points", "9"]);
    let (_, rows) = csv_rows(&dir.path().join("scan.csv"));
    let half_pi = std::f64::consts::FRAC_PI_2;
    for r in &rows {
        let on_border = r[0] == 0.0 || (r[0] - half_pi).abs() < 1e-12 || (r[1] - half_pi).abs() < 1e-12;
        if on_border {
            assert!(r[2].abs() < 1e-6, "{r:?}");
        } else {
            assert!(r[2] > 1e-6, "{r:?}");
        }
        assert!(r[3] > 0.9, "{r:?}");
    }
    let summary = json(&dir.path().join("scan_summary.json"));
    assert_eq!(summary["argmin"][0]["theta"], 0.0);
}

#[test]
fn witness_is_deterministic_and_linked_to_manifest() {
    let r = recipes().join("fig6.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run(&["witness", "--recipe", s(&r), "--out", s(d.path()), "--seed", "4"]);
    }
    let wa = std::fs::read(a.path().join("witness.json")).unwrap();
    let wb = std::fs::read(b.path().join("witness.json")).unwrap();
    assert_eq!(wa, wb);
    let m = json(&a.path().join("manifest.json"));
    let w = json(&a.path().join("witness.json"));
    assert_eq!(m["hash"], w["manifest"]);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["command"], "witness");
    let v = w["reports"][0]["value"].as_f64().unwrap();
    assert!((v - 0.98).abs() < 0.02, "{v}");
}

#[test]
fn three_mode_cluster_table() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("table1.json");
    run(&["witness", "--recipe", s(&r), "--out", s(dir.path())]);
    let w = json(&dir.path().join("witness.json"));
    let reports = w["reports"].as_array().unwrap();
    let value = |p: &str| {
        reports
            .iter()
            .find(|x| x["partition"] == p)
            .and_then(|x| x["value"].as_f64())
            .unwrap()
    };
    assert!(value("1|2|3") > 1e-3);
    assert!(value("12|3").abs() < 1e-3);
    let bound = w["cluster"]["nullifier_bound"].as_f64().unwrap();
    let sum = w["cluster"]["nullifier_sum"].as_f64().unwrap();
    assert!((sum - bound).abs() < 1e-6 * bound.max(1.0), "{sum} vs {bound}");
}

#[test]
fn cluster_opt_reaches_bound() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("table2.json");
    run(&["cluster-opt", "--recipe", s(&r), "--out", s(dir.path())]);
    let c = json(&dir.path().join("cluster.json"));
    let bound = c["nullifier_bound"].as_f64().unwrap();
    let sum = c["nullifier_sum"].as_f64().unwrap();
    assert!(sum <= bound * (1.0 + 1e-6), "{sum} vs {bound}");
    assert_eq!(c["nullifier_variances"].as_array().unwrap().len(), 4);
}

#[test]
fn lossless_sweep_matches_witness() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = r#"{"modes": 2, "cutoff": 10, "squeezing_r": [0.2, -0.2],
        "subtractions": [{"angles": [0.5]}], "seed": 3,
        "sweep": {"eta": [1.0, 0.6], "subtraction": 0, "angles": [0.5]}}"#;
    let path = dir.path().join("r.json");
    std::fs::write(&path, recipe).unwrap();
    let sweep_out = dir.path().join("sweep");
    let wit_out = dir.path().join("wit");
    run(&["loss-sweep", "--recipe", s(&path), "--out", s(&sweep_out), "--order", "2"]);
    run(&["witness", "--recipe", s(&path), "--out", s(&wit_out), "--order", "2", "--starts", "1"]);
    let (header, rows) = csv_rows(&sweep_out.join("loss_sweep.csv"));
    assert_eq!(header, ["angle", "eta", "W"]);
    let at_one = rows.iter().find(|r| r[1] == 1.0).unwrap()[2];
    let w = json(&wit_out.join("witness.json"))["reports"][0]["value"].as_f64().unwrap();
    assert!((at_one - w).abs() < 1e-9, "{at_one} vs {w}");
    let lossy = rows.iter().find(|r| r[1] == 0.6).unwrap()[2];
    assert!(lossy <= at_one + 1e-6);
    let (_, crit) = csv_rows(&sweep_out.join("critical_eta.csv"));
    assert_eq!(crit.len(), 1);
    assert!(crit[0][1] > 0.0 && crit[0][1] < 1.0);
}

#[test]
fn tiny_experiment_runs() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("fig10.json");
    run(&[
        "experiment", "--recipe", s(&r), "--out", s(dir.path()), "--samples", "200", "--reps", "2", "--points", "4",
    ]);
    let (header, rows) = csv_rows(&dir.path().join("witness_map.csv"));
    assert_eq!(header.len(), 11);
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r[4].is_finite() && r[4] >= 0.0));
    let f = json(&dir.path().join("fisher.json"));
    assert_eq!(f["settings"].as_array().unwrap().len(), 2);
    let samples = std::fs::read_to_string(dir.path().join("samples_setting1.csv")).unwrap();
    assert!(samples.contains("# n_samples: 200"));
}

#[test]
fn invalid_recipe_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"modes": 2, "cutoff": 6, "squeezing_r": [0.1]}"#).unwrap();
    let out = bin()
        .args(["witness", "--recipe", s(&path), "--out", s(&dir.path().join("o"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!dir.path().join("o").join("manifest.json").exists());
}

#[test]
fn bad_partition_fails() {
    let dir = tempfile::tempdir().unwrap();
    let r = recipes().join("fig5.json");
    let out = bin()
        .args(["witness", "--recipe", s(&r), "--out", s(dir.path()), "--partition", "1|3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
