use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nsbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nsbm(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_run(dir: &Path, seed: &str) {
    let d = dir.to_str().unwrap();
    ok(&["synth", "--n-crash", "20", "--n-noncrash", "100", "--seed", seed, "--out", d]);
    for cmd in ["extract", "train", "calibrate", "evaluate"] {
        ok(&[cmd, "--T", "1.0", "--out", d]);
    }
    ok(&["report", "--out", d]);
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        ok(&["synth", "--n-crash", "20", "--n-noncrash", "100", "--seed", seed, "--out", dir.to_str().unwrap()]);
        fs::read(dir.join("data/trajectories.csv")).unwrap()
    };
    let a = run("a", "7");
    let b = run("b", "7");
    let c = run("c", "8");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn extracted_crash_events_exceed_the_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    ok(&["synth", "--n-crash", "20", "--n-noncrash", "20", "--seed", "3", "--out", d]);
    ok(&["extract", "--T", "1.0", "--out", d]);
    let events = json(&tmp.path().join("data/events_crash_T1.0.json"));
    let list = events["events"].as_array().unwrap();
    assert!(!list.is_empty());
    for e in list {
        assert!(e["event"]["z"].as_f64().unwrap() > -1.0);
    }
}

#[test]
fn pipeline_reports_every_model_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    small_run(&a, "5");
    small_run(&b, "5");

    let report = json(&a.join("eval/report_T1.0.json"));
    let hash = report["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(report["seed"], 5);
    for model in ["nsbm_gat", "sbm", "ttc", "mttc", "drac"] {
        let m = &report["models"][model];
        for key in ["crps", "ap", "auc"] {
            assert!(m.get(key).is_some(), "{model} lacks {key}");
        }
        let auc = m["auc"]["1.0"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }
    assert!(report["models"]["nsbm_gat"]["crps"].as_f64().unwrap() > 0.0);

    // provenance travels with every artifact
    assert_eq!(json(&a.join("models/nsbm_crash_T1.0.json"))["meta"]["config_hash"], hash.as_str());
    assert_eq!(json(&a.join("calib/nsbm_T1.0.json"))["config_hash"], hash.as_str());
    assert!(fs::read_to_string(a.join("eval/summary.csv")).unwrap().contains("nsbm_gat,1.0"));

    for rel in [
        "data/trajectories.csv",
        "data/events_crash_T1.0.json",
        "models/nsbm_noncrash.json",
        "models/nsbm_crash_T1.0.json",
        "models/sbm_crash_T1.0.json",
        "calib/nsbm_T1.0.json",
        "eval/report.json",
        "eval/summary.csv",
        "eval/roc_T1.0.csv",
    ] {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel} differs");
    }

    let pred = a.join("pred.csv");
    ok(&[
        "predict",
        "--T",
        "1.0",
        "--out",
        a.to_str().unwrap(),
        "--input",
        a.join("data/trajectories.csv").to_str().unwrap(),
        "--output",
        pred.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&pred).unwrap();
    assert!(text.starts_with("sample_id,t,z,m,warn"));
    for line in text.lines().skip(1) {
        let m: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((0.0..=2.0).contains(&m));
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    assert_eq!(nsbm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nsbm(&["extract", "--T", "0.15", "--out", d]).status.code(), Some(1));
    assert_eq!(nsbm(&["extract", "--T", "1.0", "--out", d]).status.code(), Some(2));
    assert_eq!(nsbm(&["--help"]).status.code(), Some(0));

    ok(&["synth", "--n-crash", "20", "--n-noncrash", "20", "--seed", "2", "--out", d]);
    assert_eq!(nsbm(&["predict", "--out", d, "--input", "x.csv"]).status.code(), Some(1));

    // a learning rate no halving schedule can tame
    let config = tmp.path().join("wild.toml");
    let stored = fs::read_to_string(tmp.path().join("config.toml")).unwrap();
    fs::write(&config, stored.replace("lr = 0.0001", "lr = 1e12")).unwrap();
    let c = config.to_str().unwrap();
    ok(&["extract", "--T", "1.0", "--out", d, "--config", c]);
    let out = nsbm(&["train", "--T", "1.0", "--out", d, "--config", c]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("models").exists(), "failed training left files behind");
}
