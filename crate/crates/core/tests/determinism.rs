use std::path::Path;

use hrcplan::harness::{cmd_benchmark, cmd_generate, HarnessConfig};
use serde_json::{json, Value};

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

fn config(out: &Path, seed: u64) -> HarnessConfig {
    let scenes = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scenes");
    let cfg = shipped_with(json!({
        "seed": seed,
        "output_dir": out,
        "scenes": [scenes.join("workstation.json"), scenes.join("wall.json")],
        "human": { "dataset": { "count_per_script": 5, "window_stride": 25 } },
        "expert": { "scenarios_per_workspace": 2, "shortcut_attempts": 10,
                    "planner": { "iteration_budget": 600 } },
        "expert_human": { "pool_size": 3 },
        "benchmark": { "scenarios_per_workspace": 3, "planners": ["rrt", "rrt_star"],
                       "rrt": { "iteration_budget": 800 },
                       "rrt_star": { "iteration_budget": 300, "stop_ratio": 1.1 } }
    }));
    let p = out.with_extension("json");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    std::fs::write(&p, cfg.to_string()).unwrap();
    HarnessConfig::load(&p).unwrap()
}

fn read(dir: &Path, f: &str) -> String {
    std::fs::read_to_string(dir.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"))
}

/// Drops the wall-time column, the only nondeterministic field.
fn without_timing(csv_text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let col = r.headers().unwrap().iter().position(|h| h == "planning_time").unwrap();
    r.records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != col)
                .map(|(_, v)| v.to_string())
                .collect()
        })
        .collect()
}

#[test]
fn same_seed_same_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let (ca, cb, cc) = (config(&a, 5), config(&b, 5), config(&c, 6));
    for cfg in [&ca, &cb, &cc] {
        cmd_generate(cfg).unwrap();
    }
    for f in ["human_windows.jsonl", "expert.jsonl", "manifest.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_ne!(read(&a, "human_windows.jsonl"), read(&c, "human_windows.jsonl"));

    cmd_benchmark(&ca).unwrap();
    cmd_benchmark(&cb).unwrap();
    let (ra, rb) = (read(&a, "benchmark_metrics.csv"), read(&b, "benchmark_metrics.csv"));
    assert_eq!(without_timing(&ra), without_timing(&rb));
    assert_eq!(without_timing(&ra).len(), 2 * 3 * 2);
}
