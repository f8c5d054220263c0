use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{HarnessConfig, HumanMode, OutputPaths, SimulationSection};
use super::generate::{build_human_dataset, derived_seeds};
use super::metrics::{mean_std, smoothness, write_metrics_csv, MetricsRecord};
use super::{ensure_dir, write_json, SceneFile, Workspaces};
use crate::arm_models::{arm_capsules, robot_link_capsules, AnthropometricParams, JointConfig};
use crate::collision::{capsules_collide, config_in_collision, Capsule, Scene};
use crate::error::{Error, Result};
use crate::gnn_planner::{plan_bidirectional, replan_trigger, GnnWeights};
use crate::human_synth::{ArmTrajectory, HumanDataset, MotionLabel, Split, CAPTURE_RATE_HZ, OBSERVATION_STEPS, PREDICTION_STEPS};
use crate::oracle_planners::{ee_path_length, resample_path, Path};
use crate::predictor::{predict_uncertain, DropoutSpec, PredictorWeights, UncertainPrediction};
use crate::workspace_graph::{GraphSchema, PredictedArm};

pub const TICK_DT: f64 = 1.0 / CAPTURE_RATE_HZ;

/// Everything one simulated run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub mode: HumanMode,
    pub trajectory_id: usize,
    pub start_delay: usize,
    pub reached_goal: bool,
    pub arrival_tick: Option<usize>,
    /// Ticks at which the robot overlapped the true human capsules.
    pub collision_ticks: Vec<usize>,
    pub replan_ticks: Vec<usize>,
    pub failed_replans: usize,
    pub planning_time: f64,
    pub executed: Vec<JointConfig>,
}

impl RunResult {
    pub fn first_replan_time(&self) -> Option<f64> {
        self.replan_ticks.first().map(|&t| t as f64 * TICK_DT)
    }
}

/// Loaded models and data shared by all runs.
pub struct SimContext<'a> {
    pub cfg: &'a SimulationSection,
    pub seed: u64,
    pub scene_file: &'a SceneFile,
    pub scene: Scene,
    pub planner: &'a GnnWeights,
    pub predictor: Option<&'a PredictorWeights>,
    pub trajectories: Vec<(usize, &'a ArmTrajectory)>,
    /// Straight or planned static path from start to goal.
    pub nominal: Vec<JointConfig>,
}

fn p_h<'b>(ctx: &SimContext<'b>) -> &'b AnthropometricParams {
    &ctx.scene_file.anthropometrics
}

fn schema<'b>(ctx: &SimContext<'b>) -> &'b GraphSchema {
    &ctx.scene_file.schema
}

/// Bone-vector observation window ending at `frame`, padded at the front
/// with the first frame (the person stood still before playback).
pub fn observation_window(traj: &ArmTrajectory, frame: usize) -> Array2<f64> {
    Array2::from_shape_fn((OBSERVATION_STEPS, 6), |(i, c)| {
        let f = (frame + i + 1).saturating_sub(OBSERVATION_STEPS);
        traj.bone_frames[f].to_array()[c]
    })
}

pub fn sim_trajectories(ds: &HumanDataset, motion: Option<MotionLabel>) -> Vec<(usize, &ArmTrajectory)> {
    ds.trajectory_ids(Split::Test)
        .into_iter()
        .filter(|&i| motion.is_none_or(|m| ds.labels[i] == m))
        .map(|i| (i, &ds.trajectories[i]))
        .collect()
}

impl<'a> SimContext<'a> {
    pub fn new(
        cfg: &'a SimulationSection,
        seed: u64,
        scene_file: &'a SceneFile,
        planner: &'a GnnWeights,
        predictor: Option<&'a PredictorWeights>,
        trajectories: Vec<(usize, &'a ArmTrajectory)>,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Dataset("no test trajectories for the simulation".into()));
        }
        if cfg.modes.contains(&HumanMode::WithPrediction) {
            if predictor.is_none() {
                return Err(Error::Config("with_prediction needs predictor weights".into()));
            }
            if cfg.k != scene_file.schema.k_samples {
                return Err(Error::Config(format!(
                    "simulation.k {} must equal the graph schema's k_samples {}",
                    cfg.k, scene_file.schema.k_samples
                )));
            }
        }
        let scene = scene_file.scene();
        let start = JointConfig::new(cfg.start);
        let goal = JointConfig::new(cfg.goal);
        for c in [&start, &goal] {
            if config_in_collision(c, &scene)? {
                return Err(Error::Config("simulation start and goal must be collision-free".into()));
            }
        }
        let opts = crate::gnn_planner::BidirectionalOptions { seed, ..cfg.planner };
        let out = plan_bidirectional(&start, &goal, &scene, None, planner, &scene_file.schema, &opts)?;
        let Some(path) = out.outcome.path else {
            return Err(Error::Config("no static path between the simulation start and goal".into()));
        };
        let nominal = resample_path(&path, cfg.robot_step).configs;
        Ok(Self {
            cfg,
            seed,
            scene_file,
            scene,
            planner,
            predictor,
            trajectories,
            nominal,
        })
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_mul(0x94D0_49BB_1331_11EB) ^ (run as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
    }

    fn perceived(&self, mode: HumanMode, traj: &ArmTrajectory, frame: usize, mc_seed: u64) -> Result<(Vec<Capsule>, Option<PredictedArm>)> {
        let p_h = p_h(self);
        let margin = self.scene_file.human_safety_margin;
        let schema = schema(self);
        let now = traj.frames[frame];
        let mut caps = arm_capsules(&now, p_h, margin).to_vec();
        match mode {
            HumanMode::None => Ok((Vec::new(), None)),
            HumanMode::CurrentOnly => Ok((caps, Some(PredictedArm::static_pose(now, schema.k_samples, &schema.horizons)))),
            HumanMode::WithPrediction => {
                let w = self.predictor.expect("checked in new");
                let x = observation_window(traj, frame);
                let pred: UncertainPrediction =
                    predict_uncertain(&x, w, self.cfg.k, DropoutSpec { p: self.cfg.dropout }, mc_seed, PREDICTION_STEPS, TICK_DT)?;
                let mut steps: Vec<usize> = (0..PREDICTION_STEPS).step_by(self.cfg.capsule_stride).collect();
                if steps.last() != Some(&(PREDICTION_STEPS - 1)) {
                    steps.push(PREDICTION_STEPS - 1);
                }
                let dense = PredictedArm::from_prediction(&pred, p_h, &steps)?;
                caps.extend(dense.capsules(p_h, margin));
                Ok((caps, Some(PredictedArm::from_prediction(&pred, p_h, &schema.horizons)?)))
            }
        }
    }

    pub fn run(&self, run: usize, mode: HumanMode) -> Result<RunResult> {
        let seed = self.run_seed(run);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (trajectory_id, traj) = self.trajectories[run % self.trajectories.len()];
        let start_delay = self.cfg.start_delay + rng.random_range(0..=self.cfg.start_delay_jitter);
        let goal = JointConfig::new(self.cfg.goal);
        let truth_margin = 0.0;
        let p_h = *p_h(self);

        let mut plan = self.nominal.clone();
        let mut idx = 0usize;
        let mut res = RunResult {
            run,
            mode,
            trajectory_id,
            start_delay,
            reached_goal: false,
            arrival_tick: None,
            collision_ticks: Vec::new(),
            replan_ticks: Vec::new(),
            failed_replans: 0,
            planning_time: 0.0,
            executed: Vec::new(),
        };
        for t in 0..self.cfg.max_ticks {
            let frame = t.min(traj.len() - 1);
            let robot = plan[idx];
            res.executed.push(robot);
            let links = robot_link_capsules(&robot, &self.scene.robot)?;
            let truth = arm_capsules(&traj.frames[frame], &p_h, truth_margin);
            if links.iter().any(|l| truth.iter().any(|h| capsules_collide(l, h))) {
                res.collision_ticks.push(t);
            }
            if idx + 1 == plan.len() && robot == goal {
                res.reached_goal = true;
                res.arrival_tick = Some(t);
                break;
            }
            let mut hold = t < start_delay;
            if mode != HumanMode::None {
                let (caps, pred) = self.perceived(mode, traj, frame, seed ^ (t as u64) << 20)?;
                let seen = self.scene.clone().with_human(caps);
                let rest = Path::new(plan[idx..].to_vec());
                if replan_trigger(&rest, &seen, self.cfg.planner.edge_step) {
                    res.replan_ticks.push(t);
                    // capsules already touching either endpoint cannot be planned around
                    let keep: Vec<Capsule> = seen
                        .human_capsules
                        .iter()
                        .filter(|c| {
                            let blocks = |q: &JointConfig| {
                                robot_link_capsules(q, &self.scene.robot)
                                    .map(|ls| ls.iter().any(|l| capsules_collide(l, c)))
                                    .unwrap_or(true)
                            };
                            !blocks(&robot) && !blocks(&goal)
                        })
                        .copied()
                        .collect();
                    let planning = self.scene.clone().with_human(keep);
                    let opts = crate::gnn_planner::BidirectionalOptions {
                        seed: seed ^ t as u64,
                        ..self.cfg.planner
                    };
                    let t0 = Instant::now();
                    let out = plan_bidirectional(&robot, &goal, &planning, pred.as_ref(), self.planner, schema(self), &opts)?;
                    res.planning_time += t0.elapsed().as_secs_f64();
                    match out.outcome.path {
                        Some(p) => {
                            plan = resample_path(&p, self.cfg.robot_step).configs;
                            idx = 0;
                        }
                        None => {
                            res.failed_replans += 1;
                            hold = true;
                        }
                    }
                }
            }
            if !hold && idx + 1 < plan.len() {
                idx += 1;
            }
        }
        Ok(res)
    }

    pub fn record(&self, r: &RunResult) -> MetricsRecord {
        let (acc, jerk) = smoothness(&r.executed, TICK_DT);
        MetricsRecord {
            scenario_id: format!("run{}", r.run),
            workspace: self.scene_file.name.clone(),
            planner: "gnn".into(),
            human_mode: r.mode.name().into(),
            success: r.reached_goal && r.collision_ticks.is_empty(),
            valid: r.collision_ticks.is_empty(),
            collisions: r.collision_ticks.len(),
            ee_path_length: ee_path_length(&r.executed, &self.scene.robot),
            planning_time: r.planning_time,
            mean_abs_accel: acc,
            mean_abs_jerk: jerk,
            replan_count: r.replan_ticks.len(),
            first_replan_time: r.first_replan_time(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub runs: usize,
    pub reached_goal: usize,
    pub runs_with_collision: usize,
    pub collision_ticks: usize,
    pub runs_with_replan: usize,
    pub accel_mean: f64,
    pub accel_std: f64,
    pub jerk_mean: f64,
    pub jerk_std: f64,
    pub first_replan_mean: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub modes: BTreeMap<String, ModeSummary>,
    /// Fraction of runs where prediction replanned strictly before the
    /// current-pose baseline (both must replan).
    pub earlier_replan_fraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub runs: Vec<RunResult>,
    pub records: Vec<MetricsRecord>,
    pub summary: SimulationSummary,
}

pub fn summarize(runs: &[RunResult], records: &[MetricsRecord]) -> SimulationSummary {
    let mut modes = BTreeMap::new();
    for mode in [HumanMode::None, HumanMode::CurrentOnly, HumanMode::WithPrediction] {
        let idx: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].mode == mode).collect();
        if idx.is_empty() {
            continue;
        }
        let acc: Vec<f64> = idx.iter().filter_map(|&i| records[i].mean_abs_accel).collect();
        let jerk: Vec<f64> = idx.iter().filter_map(|&i| records[i].mean_abs_jerk).collect();
        let firsts: Vec<f64> = idx.iter().filter_map(|&i| runs[i].first_replan_time()).collect();
        let (a, j) = (mean_std(&acc), mean_std(&jerk));
        modes.insert(
            mode.name().to_string(),
            ModeSummary {
                runs: idx.len(),
                reached_goal: idx.iter().filter(|&&i| runs[i].reached_goal).count(),
                runs_with_collision: idx.iter().filter(|&&i| !runs[i].collision_ticks.is_empty()).count(),
                collision_ticks: idx.iter().map(|&i| runs[i].collision_ticks.len()).sum(),
                runs_with_replan: firsts.len(),
                accel_mean: a.mean,
                accel_std: a.std,
                jerk_mean: j.mean,
                jerk_std: j.std,
                first_replan_mean: (!firsts.is_empty()).then(|| mean_std(&firsts).mean),
            },
        );
    }
    let by_run = |mode: HumanMode| -> BTreeMap<usize, Option<f64>> {
        runs.iter().filter(|r| r.mode == mode).map(|r| (r.run, r.first_replan_time())).collect()
    };
    let (co, wp) = (by_run(HumanMode::CurrentOnly), by_run(HumanMode::WithPrediction));
    let earlier_replan_fraction = (!co.is_empty() && !wp.is_empty()).then(|| {
        let earlier = wp
            .iter()
            .filter(|(run, w)| matches!((w, co.get(run).copied().flatten()), (Some(w), Some(c)) if *w < c))
            .count();
        earlier as f64 / wp.len() as f64
    });
    SimulationSummary {
        modes,
        earlier_replan_fraction,
    }
}

/// Runs every configured mode on the same seeded runs.
pub fn cmd_simulate(cfg: &HarnessConfig) -> Result<SimulationReport> {
    let ws = Workspaces::load(cfg)?;
    let out = OutputPaths::new(&cfg.output_dir);
    ensure_dir(&out.dir)?;
    let sim = &cfg.simulation;
    let pw = out.planner_weights();
    if !pw.is_file() {
        return Err(Error::Config(format!("{} missing; train the planner first", pw.display())));
    }
    let planner = GnnWeights::load(&pw)?;
    let predictor = if sim.modes.contains(&HumanMode::WithPrediction) {
        let p = out.predictor_weights();
        if !p.is_file() {
            return Err(Error::Config(format!("{} missing; train the predictor first", p.display())));
        }
        Some(PredictorWeights::load(&p)?)
    } else {
        None
    };
    let (human_seed, _, _) = derived_seeds(cfg.seed);
    let ds = build_human_dataset(cfg, &ws, human_seed)?;
    let trajs = sim_trajectories(&ds, sim.motion);
    let ctx = SimContext::new(sim, cfg.seed, &ws.files[sim.scene], &planner, predictor.as_ref(), trajs)?;

    let mut runs = Vec::new();
    for run in 0..sim.runs {
        for &mode in &sim.modes {
            let r = ctx.run(run, mode)?;
            log::debug!(
                "run {run} {}: collisions {} replans {} first {:?}",
                mode.name(),
                r.collision_ticks.len(),
                r.replan_ticks.len(),
                r.first_replan_time()
            );
            runs.push(r);
        }
    }
    let records: Vec<MetricsRecord> = runs.iter().map(|r| ctx.record(r)).collect();
    let summary = summarize(&runs, &records);
    write_metrics_csv(&out.sim_metrics(), &records)?;
    write_json(&out.sim_summary(), &summary)?;
    // the timeline keeps full joint trajectories for the first run only
    let timeline: Vec<RunResult> = runs
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r.run != 0 {
                r.executed.clear();
            }
            r
        })
        .collect();
    write_json(&out.sim_timeline(), &timeline)?;
    Ok(SimulationReport { runs, records, summary })
}
