use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{ExpertHumanSection, HarnessConfig, OutputPaths};
use super::{ensure_dir, write_json, Workspaces};
use crate::arm_models::{AnthropometricParams, ArmBonePose};
use crate::error::{Error, Result};
use crate::human_synth::{build_dataset, HumanDataset, Split, OBSERVATION_STEPS, PREDICTION_STEPS};
use crate::oracle_planners::generate_expert_dataset;
use crate::predictor::UncertainPrediction;
use crate::workspace_graph::{GraphSchema, PredictedArm};
use crate::Vec3;

#[derive(Clone, Debug, Serialize)]
pub struct SeedManifest {
    pub seed: u64,
    pub human_seed: u64,
    pub expert_human_seed: u64,
    pub expert_seed: u64,
    pub trajectories: usize,
    pub trajectories_per_label: BTreeMap<String, usize>,
    pub windows: BTreeMap<String, usize>,
    pub split_trajectory_ids: BTreeMap<String, Vec<usize>>,
    pub expert_paths: usize,
    pub expert_samples: usize,
    pub expert_skipped: usize,
}

#[derive(Clone, Debug)]
pub struct GenerateReport {
    pub manifest: SeedManifest,
}

pub fn derived_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, seed ^ 0x00A1_51DE, seed ^ 0x0E8E_2700)
}

/// Stand-in for MC-dropout output before a predictor exists: the true
/// future of a trajectory with `k` smoothly offset bone directions whose
/// spread grows linearly over the horizon.
pub fn surrogate_prediction(
    future: &[ArmBonePose],
    k: usize,
    sigma: [f64; 2],
    dt: f64,
    rng: &mut impl Rng,
) -> Result<UncertainPrediction> {
    let steps = future.len();
    let samples = (0..k)
        .map(|_| {
            let d: [Vec3; 2] = std::array::from_fn(|_| {
                Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            Array2::from_shape_fn((steps, 6), |(s, c)| {
                let frac = if steps > 1 { s as f64 / (steps - 1) as f64 } else { 0.0 };
                let sd = sigma[0] + (sigma[1] - sigma[0]) * frac;
                let bone = if c < 3 { future[s].phi1 } else { future[s].phi2 };
                bone[c % 3] + sd * d[c / 3][c % 3]
            })
        })
        .collect();
    UncertainPrediction::from_samples(samples, dt)
}

/// Surrogate predicted arms taken from random moments of training trajectories.
pub fn expert_human_pool(
    ds: &HumanDataset,
    p_h: &AnthropometricParams,
    schema: &GraphSchema,
    cfg: &ExpertHumanSection,
    seed: u64,
) -> Result<Vec<PredictedArm>> {
    let train = ds.trajectory_ids(Split::Train);
    if train.is_empty() || cfg.pool_size == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.pool_size)
        .map(|_| {
            let traj = &ds.trajectories[train[rng.random_range(0..train.len())]];
            let t0 = rng.random_range(0..=traj.len() - OBSERVATION_STEPS - PREDICTION_STEPS);
            let start = t0 + OBSERVATION_STEPS;
            let future = &traj.bone_frames[start..start + PREDICTION_STEPS];
            let pred = surrogate_prediction(future, schema.k_samples, [cfg.sigma_start, cfg.sigma_end], 1.0 / traj.rate, &mut rng)?;
            PredictedArm::from_prediction(&pred, p_h, &schema.horizons)
        })
        .collect()
}

pub fn build_human_dataset(cfg: &HarnessConfig, ws: &Workspaces, seed: u64) -> Result<HumanDataset> {
    build_dataset(&cfg.human.scripts(), ws.anthropometrics(), &cfg.human.dataset, seed)
}

pub fn cmd_generate(cfg: &HarnessConfig) -> Result<GenerateReport> {
    let ws = Workspaces::load(cfg)?;
    let out = OutputPaths::new(&cfg.output_dir);
    ensure_dir(&out.dir)?;
    let (human_seed, pool_seed, expert_seed) = derived_seeds(cfg.seed);

    let ds = build_human_dataset(cfg, &ws, human_seed)?;
    ds.write_jsonl(&out.human_jsonl())?;
    log::info!("human dataset: {} trajectories", ds.trajectories.len());

    let pool = expert_human_pool(&ds, ws.anthropometrics(), ws.schema(), &cfg.expert_human, pool_seed)?;
    let expert = generate_expert_dataset(&ws.scenes, &pool, ws.anthropometrics(), &cfg.expert, expert_seed)?;
    if expert.samples.is_empty() {
        return Err(Error::Dataset("expert generation produced no paths".into()));
    }
    expert.write_jsonl(&out.expert_jsonl())?;
    log::info!("expert dataset: {} paths, {} samples, {} skipped", expert.paths, expert.samples.len(), expert.skipped);

    let mut per_label = BTreeMap::new();
    for l in &ds.labels {
        *per_label.entry(format!("{l:?}")).or_insert(0) += 1;
    }
    let splits = [Split::Train, Split::Val, Split::Test];
    let manifest = SeedManifest {
        seed: cfg.seed,
        human_seed,
        expert_human_seed: pool_seed,
        expert_seed,
        trajectories: ds.trajectories.len(),
        trajectories_per_label: per_label,
        windows: splits.iter().map(|&s| (split_name(s), ds.windows(s).len())).collect(),
        split_trajectory_ids: splits.iter().map(|&s| (split_name(s), ds.trajectory_ids(s))).collect(),
        expert_paths: expert.paths,
        expert_samples: expert.samples.len(),
        expert_skipped: expert.skipped,
    };
    write_json(&out.manifest(), &manifest)?;
    Ok(GenerateReport { manifest })
}

pub fn split_name(s: Split) -> String {
    match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_models::reconstruct_arm;

    #[test]
    fn surrogate_spread_grows_and_keeps_unit_bones() {
        let pose = ArmBonePose {
            phi1: Vec3::new(0.0, -0.6, -0.8),
            phi2: Vec3::new(0.0, -1.0, 0.0),
        };
        let future = vec![pose; 50];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pred = surrogate_prediction(&future, 8, [0.01, 0.2], 0.04, &mut rng).unwrap();
        let p_h = AnthropometricParams::default();
        let s0 = pred.joint_sigma(0, &p_h)[1];
        let s49 = pred.joint_sigma(49, &p_h)[1];
        assert!(s49 > 5.0 * s0, "{s0} {s49}");
        for k in 0..8 {
            let j = reconstruct_arm(&pred.sample_pose(k, 30), &p_h).unwrap();
            assert!(((j.elbow - j.shoulder).norm() - p_h.upper_arm_length).abs() < 1e-9);
        }
    }
}
