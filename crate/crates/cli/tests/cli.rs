use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scenes")
}

/// Shipped config with `patch` merged over it, objects recursively.
fn shipped_with(patch: Value) -> Value {
    fn merge(base: &mut Value, patch: Value) {
        match (base, patch) {
            (Value::Object(b), Value::Object(p)) => {
                for (k, v) in p {
                    merge(b.entry(k).or_insert(Value::Null), v);
                }
            }
            (b, p) => *b = p,
        }
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let mut base: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    merge(&mut base, patch);
    base
}

fn tiny_config(out: &Path) -> Value {
    let s = scenes_dir();
    shipped_with(json!({
        "seed": 3,
        "output_dir": out,
        "scenes": [s.join("workstation.json"), s.join("shelf.json")],
        "human": { "dataset": { "count_per_script": 8, "window_stride": 20 } },
        "expert": { "scenarios_per_workspace": 3, "shortcut_attempts": 10,
                    "planner": { "iteration_budget": 600 } },
        "expert_human": { "pool_size": 4 },
        "predictor": { "hidden": [8], "epochs": 1, "windows_per_epoch": 32, "val_windows": 16 },
        "planner": { "widths": [8, 8], "epochs": 1 },
        "benchmark": { "scenarios_per_workspace": 2, "planners": ["rrt", "gnn"],
                       "rrt": { "iteration_budget": 800 }, "failure_threshold": 1.0 },
        "uncertainty": { "ks": [2, 4], "windows": 3 }
    }))
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn hrcplan(args: &[&str], config: &Path) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_hrcplan"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().expect("exit code")
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hrcplan(&["generate"], &dir.path().join("nope.json")), 2);
}

#[test]
fn unknown_version_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path());
    cfg["version"] = json!(99);
    let p = write_config(dir.path(), &cfg);
    assert_eq!(hrcplan(&["benchmark"], &p), 2);
}

#[test]
fn missing_datasets_fail_without_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &tiny_config(&dir.path().join("out")));
    assert_eq!(hrcplan(&["train", "--target", "planner"], &p), 1);
}

#[test]
fn tiny_pipeline_and_zero_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let p = write_config(dir.path(), &tiny_config(&out));
    assert_eq!(hrcplan(&["generate", "--seed", "11"], &p), 0);
    for f in ["human_windows.jsonl", "expert.jsonl", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(hrcplan(&["train", "--epochs", "0"], &p), 0);
    for f in ["predictor_curve.csv", "planner_curve.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}: {text}");
    }
    assert!(out.join("predictor_weights.json").is_file());
    assert!(out.join("planner_weights.json").is_file());

    assert_eq!(hrcplan(&["benchmark"], &p), 0);
    let csv = std::fs::read_to_string(out.join("benchmark_metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    assert_eq!(hrcplan(&["uncertainty-report"], &p), 0);
    assert!(out.join("k_sweep.csv").is_file());
}

#[test]
fn divergence_and_benchmark_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = tiny_config(&out);
    cfg["predictor"]["lr"] = json!(1e200);
    cfg["benchmark"]["planners"] = json!(["rrt"]);
    cfg["benchmark"]["rrt"] = json!({ "iteration_budget": 1, "goal_tolerance": 1e-6, "goal_bias": 0.0 });
    cfg["benchmark"]["failure_threshold"] = json!(0.0);
    let p = write_config(dir.path(), &cfg);
    assert_eq!(hrcplan(&["generate"], &p), 0);
    assert_eq!(hrcplan(&["train", "--target", "predictor", "--epochs", "2"], &p), 3);
    assert_eq!(hrcplan(&["benchmark"], &p), 4);
}
