use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use surgnn::eval::MetricsReport;

fn surgnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surgnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = surgnn(dir, args);
    assert!(
        out.status.success(),
        "`surgnn {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn small_pipeline(dir: &Path) {
    ok(
        dir,
        &[
            "--seed",
            "3",
            "synth",
            "--n",
            "30",
            "--frames-per-phase",
            "80",
            "--out",
            "data",
        ],
    );
    ok(
        dir,
        &["extract", "--manifest", "data", "--out", "features.csv"],
    );
    ok(
        dir,
        &[
            "build-graphs",
            "--manifest",
            "data",
            "--features",
            "features.csv",
            "--out",
            "graphs",
        ],
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["bogus"][..],
        &["train", "--graphs", "g", "--out", "m.json", "--frobnicate"],
        &[],
    ] {
        let out = surgnn(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    }
    assert_eq!(surgnn(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_dataset_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--n",
            "6",
            "--frames-per-phase",
            "60",
            "--out",
            "data",
        ],
    );
    let manifest = read_json(&dir.path().join("data/manifest.json"));
    let first = manifest["clips"][0].as_str().unwrap().to_string();
    let clip_path = dir.path().join("data").join(&first);
    let original = fs::read_to_string(&clip_path).unwrap();

    // Rejected while loading: the offending field is named.
    let mut clip: Value = serde_json::from_str(&original).unwrap();
    clip["labels"]["Overall"] = Value::from(9);
    fs::write(&clip_path, serde_json::to_string(&clip).unwrap()).unwrap();
    let out = surgnn(
        dir.path(),
        &["extract", "--manifest", "data", "--out", "features.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels.Overall"));

    // Loads, but fails validation: the report is printed.
    let mut clip: Value = serde_json::from_str(&original).unwrap();
    let end = clip["phases"][0]["end_frame"].as_i64().unwrap();
    clip["phases"][1]["start_frame"] = Value::from(end - 3);
    fs::write(&clip_path, serde_json::to_string(&clip).unwrap()).unwrap();
    let out = surgnn(
        dir.path(),
        &["extract", "--manifest", "data", "--out", "features.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("phases overlap") && stderr.contains("violation"),
        "{stderr}"
    );
    assert!(!dir.path().join("features.csv").exists());
}

#[test]
fn schema_mismatch_exits_one_naming_ids() {
    let dir = tempfile::tempdir().unwrap();
    small_pipeline(dir.path());
    ok(
        dir.path(),
        &[
            "train",
            "--graphs",
            "graphs",
            "--epochs",
            "5",
            "--out",
            "model.json",
        ],
    );
    let mut ckpt = read_json(&dir.path().join("model.json"));
    ckpt["feature_schema"] = Value::from("kinematic-v0");
    fs::write(
        dir.path().join("model.json"),
        serde_json::to_string(&ckpt).unwrap(),
    )
    .unwrap();

    let out = surgnn(
        dir.path(),
        &[
            "evaluate",
            "--graphs",
            "graphs",
            "--model",
            "model.json",
            "--out",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("kinematic-v0") && stderr.contains("kinematic-v1"),
        "{stderr}"
    );
}

#[test]
fn every_stage_writes_a_run_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pipeline(d);
    ok(
        d,
        &[
            "--seed",
            "1",
            "pretrain",
            "--graphs",
            "graphs",
            "--epochs",
            "5",
            "--out",
            "encoder.json",
        ],
    );
    ok(
        d,
        &[
            "--seed",
            "1",
            "train",
            "--graphs",
            "graphs",
            "--epochs",
            "5",
            "--init",
            "encoder.json",
            "--out",
            "model.json",
        ],
    );
    let table = ok(
        d,
        &[
            "evaluate",
            "--graphs",
            "graphs",
            "--model",
            "model.json",
            "--out",
            "report.json",
        ],
    );
    assert!(table.starts_with("Method"));
    assert_eq!(fs::read_to_string(d.join("report.txt")).unwrap(), table);
    ok(
        d,
        &[
            "--seed", "1", "balance", "--graphs", "graphs", "--out", "balanced",
        ],
    );
    ok(
        d,
        &[
            "baseline",
            "--graphs",
            "graphs",
            "--split",
            "all",
            "--out",
            "baseline.json",
        ],
    );
    ok(
        d,
        &[
            "embed",
            "--graphs",
            "graphs",
            "--model",
            "model.json",
            "--split",
            "test",
            "--out",
            "emb.csv",
        ],
    );
    ok(
        d,
        &["project", "--embeddings", "emb.csv", "--out", "proj.csv"],
    );

    for (path, sub) in [
        ("data/synth.run.json", "synth"),
        ("features.run.json", "extract"),
        ("graphs/build-graphs.run.json", "build-graphs"),
        ("encoder.run.json", "pretrain"),
        ("model.run.json", "train"),
        ("report.run.json", "evaluate"),
        ("balanced/balance.run.json", "balance"),
        ("baseline.run.json", "baseline"),
        ("emb.run.json", "embed"),
        ("proj.run.json", "project"),
    ] {
        let m = read_json(&d.join(path));
        assert_eq!(m["subcommand"], sub, "{path}");
        assert!(m["version"].is_string() && m["seed"].is_u64());
    }
    let train = read_json(&d.join("model.run.json"));
    assert_eq!(train["seed"], 1);
    let inputs = train["inputs"].as_object().unwrap();
    assert!(inputs.keys().any(|k| k.ends_with("encoder.json")));
    assert!(inputs.values().all(|h| h.as_str().unwrap().len() == 64));

    let history = fs::read_to_string(d.join("model.history.csv")).unwrap();
    assert!(history.starts_with("epoch,lr,loss,accuracy\n"));
    assert_eq!(history.lines().count(), 6);

    // Balanced training splits are equal per class.
    let balanced = read_json(&d.join("balanced/index.json"));
    let original = read_json(&d.join("graphs/index.json"));
    assert!(
        balanced["graphs"].as_array().unwrap().len() > original["graphs"].as_array().unwrap().len()
    );
}

#[test]
fn baseline_from_manifest_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "5",
            "synth",
            "--n",
            "69",
            "--frames-per-phase",
            "40",
            "--out",
            "data",
        ],
    );
    ok(
        d,
        &[
            "--seed",
            "1",
            "baseline",
            "--manifest",
            "data",
            "--runs",
            "10",
            "--split",
            "all",
            "--out",
            "b.json",
        ],
    );
    let r = MetricsReport::load(&d.join("b.json")).unwrap();
    assert_eq!((r.n, r.runs), (69, 10));
    assert!(r.spearman.abs() <= 0.25, "{}", r.spearman);
    let again = surgnn(
        d,
        &[
            "--seed",
            "1",
            "baseline",
            "--manifest",
            "data",
            "--runs",
            "10",
            "--split",
            "all",
            "--out",
            "c.json",
        ],
    );
    assert!(again.status.success());
    assert_eq!(
        fs::read(d.join("b.json")).unwrap(),
        fs::read(d.join("c.json")).unwrap()
    );
    let both = surgnn(
        d,
        &[
            "baseline",
            "--manifest",
            "data",
            "--graphs",
            "g",
            "--out",
            "x.json",
        ],
    );
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn three_d_pipeline_reports_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "2",
            "synth",
            "--n",
            "30",
            "--mode",
            "3D",
            "--frames-per-phase",
            "80",
            "--out",
            "data",
        ],
    );
    ok(
        d,
        &["extract", "--manifest", "data", "--out", "features.csv"],
    );
    ok(
        d,
        &[
            "build-graphs",
            "--manifest",
            "data",
            "--features",
            "features.csv",
            "--out",
            "graphs",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--graphs",
            "graphs",
            "--epochs",
            "5",
            "--out",
            "model.json",
        ],
    );
    ok(
        d,
        &[
            "evaluate",
            "--graphs",
            "graphs",
            "--model",
            "model.json",
            "--mode",
            "3D",
            "--out",
            "r.json",
        ],
    );
    let r = MetricsReport::load(&d.join("r.json")).unwrap();
    assert_eq!(r.mode, Some(surgnn::dataio::Mode::ThreeD));
    let none = surgnn(
        d,
        &[
            "evaluate",
            "--graphs",
            "graphs",
            "--model",
            "model.json",
            "--mode",
            "2D",
            "--out",
            "r2.json",
        ],
    );
    assert_eq!(none.status.code(), Some(1));
}
