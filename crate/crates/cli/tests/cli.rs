use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn xssh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xssh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn columns(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn transfer_peaks_at_the_transfer_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "transfer.json",
        r#"{"scenario": "transfer", "system": {"n_cells": 5, "j1": 0.4, "j2": 1.0, "k": [0.07, 0.07, 0.07, 0.07]}}"#,
    );
    let out = tmp.path().join("out");
    let run = xssh(&["transfer", "--config", &cfg, "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let text = fs::read_to_string(out.join("transfer.csv")).unwrap();
    assert!(!text.contains('\r'));
    let (header, rows) = columns(&text);
    assert_eq!(header, ["time", "pop_1S", "pop_1A", "pop_2A", "pop_2S", "fidelity"]);
    let peak = rows.iter().max_by(|a, b| a[4].total_cmp(&b[4])).unwrap();
    let summary = read_json(&out.join("transfer.summary.json"));
    let g = summary["coupling"].as_f64().unwrap();
    let t_transfer = std::f64::consts::PI / (2.0 * g);
    let dt = rows[1][0] - rows[0][0];
    assert!(peak[4] >= 0.99, "peak {}", peak[4]);
    assert!((peak[0] - t_transfer).abs() <= dt, "peak at {} vs {t_transfer}", peak[0]);
}

#[test]
fn swap_summary_reports_high_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = xssh(&["swap", "--out", path_str(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary = read_json(&out.join("swap.summary.json"));
    assert!(summary["fidelity"].as_f64().unwrap() > 0.999);
    for state in summary["states"].as_array().unwrap() {
        assert!(state["final_fidelity"].as_f64().unwrap() > 0.999);
        assert!(out.join(state["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn even_cell_count_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "even.json",
        r#"{"scenario": "spectrum", "system": {"n_cells": 4, "j1": 0.4}}"#,
    );
    let out = tmp.path().join("out");
    let run = xssh(&["run", "--config", &cfg, "--out", path_str(&out)]);
    assert_eq!(run.status.code(), Some(2));
    let record = read_json(&out.join("error.json"));
    assert_eq!(record["error"], "InvalidSpec");
    assert_eq!(record["field"], "system.n_cells");
    assert!(!out.join("spectrum.csv").exists());
}

#[test]
fn schema_violations_exit_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, body, field) in [
        ("unknown.json", r#"{"scenario": "spectrum", "system": {"n_cells": 5, "j1": 0.4}, "colour": 1}"#, "colour"),
        (
            "foreign.json",
            r#"{"scenario": "spectrum", "system": {"n_cells": 5, "j1": 0.4}, "params": {"gamma0": 0.1}}"#,
            "params.gamma0",
        ),
        ("missing.json", r#"{"scenario": "spectrum", "system": {"j1": 0.4}}"#, "n_cells"),
    ] {
        let cfg = write_config(tmp.path(), name, body);
        let out = tmp.path().join(name.replace(".json", ""));
        let run = xssh(&["run", "--config", &cfg, "--out", path_str(&out)]);
        assert_eq!(run.status.code(), Some(2), "{name}");
        let record = read_json(&out.join("error.json"));
        assert_eq!(record["field"], field, "{name}");
    }
}

#[test]
fn numerical_failure_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "trivial.json",
        r#"{"scenario": "calibrate", "system": {"n_cells": 5, "j1": 2.0}}"#,
    );
    let out = tmp.path().join("out");
    let run = xssh(&["run", "--config", &cfg, "--out", path_str(&out)]);
    assert_eq!(run.status.code(), Some(3));
    assert_eq!(read_json(&out.join("error.json"))["error"], "NoEdgeSolution");
}

#[test]
fn metadata_round_trips_to_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let run = xssh(&["entangle", "--out", path_str(&first)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let meta_path = first.join("entangle.meta.json");
    let meta = read_json(&meta_path);
    let original = fs::read(first.join("entangle.csv")).unwrap();
    let listed = meta["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["file"] == "entangle.csv")
        .unwrap();
    assert_eq!(listed["sha256"].as_str().unwrap().len(), 64);

    let second = tmp.path().join("second");
    let rerun = xssh(&["run", "--config", path_str(&meta_path), "--out", path_str(&second)]);
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    assert_eq!(fs::read(second.join("entangle.csv")).unwrap(), original);
    let meta2 = read_json(&second.join("entangle.meta.json"));
    assert_eq!(meta2["outputs"], meta["outputs"]);
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "disorder.json",
        r#"{"scenario": "disorder", "system": {"n_cells": 5, "j1": 0.51},
            "params": {"delta_fractions": [0.5], "n_instances": 3}}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let run = xssh(&[
            "disorder", "--config", &cfg, "--out", path_str(&out), "--seed", "42", "--instances", "4", "--threads", threads,
        ]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        outputs.push(fs::read_to_string(out.join("disorder_instances.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (header, rows) = {
        let mut lines = outputs[0].lines();
        (lines.next().unwrap().to_string(), lines.count())
    };
    assert_eq!(header, "delta,recalibrated,seed,fidelity,flagged");
    assert_eq!(rows, 8);
}
