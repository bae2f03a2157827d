//! End-to-end runs of the command line binary.

use std::path::Path;
use std::process::{Command, Output};

use edgewise::io::{parse_predictions, read_text};
use edgewise::manifest::RunManifest;

fn edgewise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgewise")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = edgewise(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic dataset with a shortened config.
fn fixture(dir: &Path) {
    ok(&["synth", "--nodes", "20", "--labeled", "60", "--unlabeled", "5", "--k", "3", "--out", s(dir)]);
    let path = dir.join("config.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&read_text(&path).unwrap()).unwrap();
    cfg["epochs"] = 4.into();
    cfg["repeats"] = 2.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
}

#[test]
fn train_predict_and_swap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let (graph, config, ckpt) = (d.join("graph"), d.join("config.json"), d.join("model.json"));
    ok(&["train", "--config", s(&config), "--graph", s(&graph), "--patterns", s(&d.join("patterns.tsv")), "--out", s(&ckpt)]);
    assert!(d.join("model.history.csv").exists());
    RunManifest::load(&d.join("model.manifest.json")).unwrap().verify().unwrap();

    std::fs::write(d.join("pairs.tsv"), "i\tj\nn00\tn05\nn05\tn00\n").unwrap();
    let preds = d.join("preds.tsv");
    ok(&["predict", "--checkpoint", s(&ckpt), "--graph", s(&graph), "--patterns", s(&d.join("pairs.tsv")), "--out", s(&preds)]);
    let rows = parse_predictions(&read_text(&preds).unwrap(), &preds).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].prediction, rows[1].prediction);

    std::fs::write(d.join("bad.tsv"), "i\tj\nn00\tnope\n").unwrap();
    let out = edgewise(&["predict", "--checkpoint", s(&ckpt), "--graph", s(&graph), "--patterns", s(&d.join("bad.tsv")), "--out", s(&d.join("x.tsv"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2: unknown node id 'nope'"));
}

#[test]
fn crossval_writes_every_fold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let out = d.join("cv");
    ok(&[
        "crossval", "--config", s(&d.join("config.json")), "--graph", s(&d.join("graph")),
        "--patterns", s(&d.join("patterns.tsv")), "--jobs", "2", "--out", s(&out),
    ]);
    let files: Vec<_> = std::fs::read_dir(out.join("metrics")).unwrap().collect();
    assert_eq!(files.len(), 10);
    let mut maes = Vec::new();
    for f in files {
        let v: serde_json::Value = serde_json::from_str(&read_text(&f.unwrap().path()).unwrap()).unwrap();
        maes.push(v["report"]["mae"].as_f64().unwrap());
    }
    let agg: serde_json::Value = serde_json::from_str(&read_text(&out.join("aggregate.json")).unwrap()).unwrap();
    let mean = maes.iter().sum::<f64>() / maes.len() as f64;
    assert!((agg["metrics"]["mae"]["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    RunManifest::load(&out.join("manifest.json")).unwrap().verify().unwrap();
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let out = edgewise(&["knn-graph", "--similarity", s(&d.join("similarity.tsv")), "--k", "20", "--out", s(&d.join("g"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(edgewise(&["train", "--graph", "x"]).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), r#"{"epochs": 3, "learning_rate": 1}"#).unwrap();
    let out = edgewise(&[
        "train", "--config", s(&d.join("bad.json")), "--graph", s(&d.join("graph")),
        "--patterns", s(&d.join("patterns.tsv")), "--out", s(&d.join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_table_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    std::fs::write(d.join("p.tsv"), "i\tj\tlabel\nn00\tn01\tabc\n").unwrap();
    let out = edgewise(&[
        "train", "--config", s(&d.join("config.json")), "--graph", s(&d.join("graph")),
        "--patterns", s(&d.join("p.tsv")), "--out", s(&d.join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}
