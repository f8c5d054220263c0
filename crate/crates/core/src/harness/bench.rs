use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{HarnessConfig, OutputPaths, PlannerKind};
use super::metrics::{mean_std, revalidate_path, write_metrics_csv, MetricsRecord};
use super::{ensure_dir, write_json, Workspaces};
use crate::arm_models::JointConfig;
use crate::collision::Scene;
use crate::error::{Error, Result};
use crate::gnn_planner::{plan_bidirectional, BidirectionalOptions, GnnWeights};
use crate::oracle_planners::{rrt_plan, rrt_star_plan, sample_free_config, PlanOutcome, PlanRequest};
use crate::workspace_graph::GraphSchema;

/// Summary columns for one planner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerSummary {
    /// End-effector path length over successful runs, m.
    pub len_mean: f64,
    pub len_std: f64,
    /// Wall time over all runs, s.
    pub time_mean: f64,
    pub time_std: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub records: Vec<MetricsRecord>,
    pub summary: BTreeMap<String, PlannerSummary>,
    /// Successful paths that failed the fine-step re-check, per planner.
    pub invalid_paths: BTreeMap<String, usize>,
    pub exceeded_threshold: bool,
}

/// Start/goal pair shared by every planner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scenario {
    pub workspace: usize,
    pub index: usize,
    pub seed: u64,
    pub start: JointConfig,
    pub goal: JointConfig,
}

pub fn scenario_seed(seed: u64, workspace: usize, index: usize) -> u64 {
    seed.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ ((workspace as u64) << 52) ^ (index as u64).wrapping_mul(0x9E37_79B9)
}

pub fn make_scenarios(scenes: &[Scene], per_workspace: usize, seed: u64) -> Vec<Scenario> {
    let mut out = Vec::new();
    for (w, scene) in scenes.iter().enumerate() {
        for i in 0..per_workspace {
            let s = scenario_seed(seed, w, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (Some(start), Some(goal)) = (sample_free_config(scene, &mut rng, 1000), sample_free_config(scene, &mut rng, 1000))
            else {
                log::warn!("no free start/goal in workspace {w}, scenario {i}");
                continue;
            };
            out.push(Scenario {
                workspace: w,
                index: i,
                seed: rng.random(),
                start,
                goal,
            });
        }
    }
    out
}

pub struct GnnContext<'a> {
    pub weights: &'a GnnWeights,
    pub schema: &'a GraphSchema,
    pub options: BidirectionalOptions,
}

pub fn run_planner(kind: PlannerKind, sc: &Scenario, scene: &Scene, cfg: &HarnessConfig, gnn: Option<&GnnContext<'_>>) -> Result<PlanOutcome> {
    let req = |params| PlanRequest {
        start: sc.start,
        goal: sc.goal,
        scene,
        params,
        seed: sc.seed,
    };
    match kind {
        PlannerKind::Rrt => rrt_plan(&req(cfg.benchmark.rrt)),
        PlannerKind::RrtStar => rrt_star_plan(&req(cfg.benchmark.rrt_star)),
        PlannerKind::Gnn => {
            let g = gnn.ok_or_else(|| Error::Config("gnn planner selected without weights".into()))?;
            let opts = BidirectionalOptions { seed: sc.seed, ..g.options };
            Ok(plan_bidirectional(&sc.start, &sc.goal, scene, None, g.weights, g.schema, &opts)?.outcome)
        }
    }
}

pub fn cmd_benchmark(cfg: &HarnessConfig) -> Result<BenchmarkReport> {
    let ws = Workspaces::load(cfg)?;
    let out = OutputPaths::new(&cfg.output_dir);
    ensure_dir(&out.dir)?;
    let b = &cfg.benchmark;
    let weights = if b.planners.contains(&PlannerKind::Gnn) {
        let p = out.planner_weights();
        if !p.is_file() {
            return Err(Error::Config(format!("{} missing; train the planner first", p.display())));
        }
        Some(GnnWeights::load(&p)?)
    } else {
        None
    };
    let gnn = weights.as_ref().map(|w| GnnContext {
        weights: w,
        schema: ws.schema(),
        options: b.gnn,
    });

    let scenarios = make_scenarios(&ws.scenes, b.scenarios_per_workspace, cfg.seed);
    let mut records = Vec::new();
    for sc in &scenarios {
        let scene = &ws.scenes[sc.workspace];
        for &kind in &b.planners {
            let outcome = match run_planner(kind, sc, scene, cfg, gnn.as_ref()) {
                Ok(o) => o,
                Err(e) => {
                    log::warn!("{} failed on w{}-s{}: {e}", kind.name(), sc.workspace, sc.index);
                    PlanOutcome::failure(0.0)
                }
            };
            let valid = match &outcome.path {
                Some(p) => revalidate_path(p, scene, b.validation_step)?,
                None => false,
            };
            records.push(MetricsRecord {
                scenario_id: format!("w{}-s{}", sc.workspace, sc.index),
                workspace: ws.files[sc.workspace].name.clone(),
                planner: kind.name().into(),
                human_mode: "none".into(),
                success: outcome.stats.success,
                valid,
                collisions: 0,
                ee_path_length: outcome.stats.ee_path_length,
                planning_time: outcome.stats.wall_time,
                mean_abs_accel: None,
                mean_abs_jerk: None,
                replan_count: 0,
                first_replan_time: None,
            });
        }
    }

    let mut summary = BTreeMap::new();
    let mut invalid_paths = BTreeMap::new();
    let mut exceeded = false;
    for &kind in &b.planners {
        let rows: Vec<&MetricsRecord> = records.iter().filter(|r| r.planner == kind.name()).collect();
        let lens: Vec<f64> = rows.iter().filter(|r| r.success).map(|r| r.ee_path_length).collect();
        let times: Vec<f64> = rows.iter().map(|r| r.planning_time).collect();
        let (l, t) = (mean_std(&lens), mean_std(&times));
        let n = rows.len().max(1) as f64;
        let success_rate = lens.len() as f64 / n;
        let invalid = rows.iter().filter(|r| r.success && !r.valid).count();
        let failures = rows.iter().filter(|r| !(r.success && r.valid)).count() as f64 / n;
        exceeded |= failures > b.failure_threshold;
        summary.insert(
            kind.name().to_string(),
            PlannerSummary {
                len_mean: l.mean,
                len_std: l.std,
                time_mean: t.mean,
                time_std: t.std,
                success_rate,
            },
        );
        invalid_paths.insert(kind.name().to_string(), invalid);
    }
    write_metrics_csv(&out.bench_metrics(), &records)?;
    write_json(&out.bench_summary(), &summary)?;
    Ok(BenchmarkReport {
        records,
        summary,
        invalid_paths,
        exceeded_threshold: exceeded,
    })
}
