use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn smm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smm"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .output()
        .expect("run smm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn workspace_data() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = smm(dir.path(), &["train", "--out", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["params"].as_array().unwrap().len(), 73);
    assert!(model["config_hash"].is_string() && model["tool_version"].is_string());

    let out = smm(dir.path(), &["eval", "--model", "model.json", "--out", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["monotonicity_violations"], 0);
    assert!(metrics.get("active_neurons").is_none());

    // Training error recomputed from the file equals the last trace row.
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    let traced: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    let train_mse = metrics["train_mse"].as_f64().unwrap();
    assert!((train_mse - traced).abs() <= 1e-12, "{train_mse} vs {traced}");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = smm(dir.path(), &["train", "--variant", "mm", "--seed", "7", "--out", "."]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for file in ["model.json", "trace.csv"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let out = smm(a.path(), &["eval", "--model", "model.json", "--out", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: Value = serde_json::from_str(&fs::read_to_string(a.path().join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["active_neurons"].as_u64().unwrap() >= 1);
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[model]\ngroups = \"six\"\n").unwrap();
    let out = smm(dir.path(), &["train", "--config", "run.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("groups"), "{}", stderr(&out));
}

#[test]
fn missing_dataset_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[data]\npath = \"absent.csv\"\n").unwrap();
    let out = smm(dir.path(), &["train", "--config", "run.toml"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.csv"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,y\n");
    for i in 0..20 {
        csv.push_str(&format!("{},{:e}\n", i as f64 / 20.0, 1e170 * (i + 1) as f64));
    }
    fs::write(dir.path().join("huge.csv"), csv).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[data]\npath = \"huge.csv\"\nnormalize = false\n[train]\nstop = \"progress\"\n",
    )
    .unwrap();
    let out = smm(dir.path(), &["train", "--config", "run.toml"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn unsupported_model_version_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = smm(dir.path(), &["train", "--variant", "mm", "--out", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = dir.path().join("model.json");
    let mut model: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    model["format_version"] = Value::from(99);
    fs::write(&path, serde_json::to_string(&model).unwrap()).unwrap();
    let out = smm(dir.path(), &["eval", "--model", "model.json"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn bundled_dataset_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let out = smm(dir.path(), &["gen", "--task", "partial_synthetic", "--out", "."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for file in ["partial_synthetic.csv", "partial_synthetic.mask.json"] {
        assert_eq!(
            fs::read(dir.path().join(file)).unwrap(),
            fs::read(workspace_data().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn bench_smoke_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = smm(dir.path(), &["bench", "--suite", "table1", "--trials", "3", "--variant", "mm", "--out", "b"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("b/report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("3")));
    // A second invocation resumes from the store and reproduces the report.
    let first = fs::read(dir.path().join("b/report.json")).unwrap();
    let out = smm(dir.path(), &["bench", "--suite", "table1", "--trials", "3", "--variant", "mm", "--out", "b"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(dir.path().join("b/report.json")).unwrap(), first);
}
