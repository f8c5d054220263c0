//! Sampling-based planners: RRT and RRT* in joint space, path shortcutting,
//! resampling, and expert demonstration generation for imitation training.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path as FsPath;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm_models::{fk_unchecked, AnthropometricParams, JointConfig, RobotGeometry, DOF};
use crate::collision::{edge_certified, edge_in_collision_unchecked, edge_subdivisions, Scene, DEFAULT_EDGE_STEP};
use crate::error::{Error, Result};
use crate::workspace_graph::PredictedArm;

/// Time between consecutive path configurations.
pub const PATH_DT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub step_size: f64,
    /// Max-norm distance at which a node counts as reaching the goal.
    pub goal_tolerance: f64,
    pub iteration_budget: usize,
    pub goal_bias: f64,
    pub edge_step: f64,
    pub rewire_gamma: f64,
    /// RRT* stops once its cost is within this factor of the straight-line
    /// joint-space distance.
    pub stop_ratio: Option<f64>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            goal_tolerance: 0.05,
            iteration_budget: 5000,
            goal_bias: 0.05,
            edge_step: DEFAULT_EDGE_STEP,
            rewire_gamma: 5.5,
            stop_ratio: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PlanRequest<'a> {
    pub start: JointConfig,
    pub goal: JointConfig,
    pub scene: &'a Scene,
    pub params: PlannerParams,
    pub seed: u64,
}

impl PlanRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.iteration_budget == 0 {
            return Err(Error::InvalidRequest("iteration budget must be positive".into()));
        }
        if !(p.step_size > 0.0 && p.goal_tolerance >= 0.0 && p.edge_step > 0.0) {
            return Err(Error::InvalidRequest("step size, tolerance and edge step must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p.goal_bias) {
            return Err(Error::InvalidRequest(format!("goal bias {} outside [0, 1]", p.goal_bias)));
        }
        let robot = &self.scene.robot;
        robot.check_limits(&self.start)?;
        robot.check_limits(&self.goal)?;
        if self.scene.config_in_collision_unchecked(&self.start) {
            return Err(Error::InvalidRequest("start configuration is in collision".into()));
        }
        if self.scene.config_in_collision_unchecked(&self.goal) {
            return Err(Error::InvalidRequest("goal configuration is in collision".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub configs: Vec<JointConfig>,
    pub dt: f64,
}

impl Path {
    pub fn new(configs: Vec<JointConfig>) -> Self {
        Self { configs, dt: PATH_DT }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.configs.len()).map(|i| i as f64 * self.dt).collect()
    }

    /// Joint-space length (sum of Euclidean edge lengths).
    pub fn joint_length(&self) -> f64 {
        self.configs.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// True iff every edge is free at the given interpolation step.
    pub fn is_valid(&self, scene: &Scene, step: f64) -> Result<bool> {
        for c in &self.configs {
            scene.robot.check_limits(c)?;
        }
        if let [only] = self.configs.as_slice() {
            return Ok(!scene.config_in_collision_unchecked(only));
        }
        Ok(self
            .configs
            .windows(2)
            .all(|w| !edge_in_collision_unchecked(&w[0], &w[1], scene, step)))
    }

    /// Like [`Path::is_valid`], but each edge is proven free along its whole length.
    pub fn is_certified(&self, scene: &Scene, step: f64) -> Result<bool> {
        for c in &self.configs {
            scene.robot.check_limits(c)?;
        }
        Ok(self.certified_unchecked(scene, step))
    }

    pub(crate) fn certified_unchecked(&self, scene: &Scene, step: f64) -> bool {
        match self.configs.as_slice() {
            [only] => !scene.config_in_collision_unchecked(only),
            cs => cs.windows(2).all(|w| edge_certified(&w[0], &w[1], scene, step)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub success: bool,
    pub ee_path_length: f64,
    pub wall_time: f64,
    pub tree_size: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub path: Option<Path>,
    pub stats: PlanStats,
}

impl PlanOutcome {
    /// No path, nothing explored.
    pub fn failure(wall_time: f64) -> Self {
        Self {
            path: None,
            stats: PlanStats {
                wall_time,
                ..Default::default()
            },
        }
    }

    /// Search uses sampled edge checks; a path that cannot be certified
    /// edge by edge is dropped.
    fn finish(path: Option<Path>, req: &PlanRequest<'_>, t0: Instant, tree_size: usize, iterations: usize) -> Self {
        let robot = &req.scene.robot;
        let path = path.filter(|p| {
            let ok = p.certified_unchecked(req.scene, req.params.edge_step);
            if !ok {
                log::debug!("dropping a path with an uncertified edge");
            }
            ok
        });
        let ee = path.as_ref().map_or(0.0, |p| ee_path_length(&p.configs, robot));
        Self {
            stats: PlanStats {
                success: path.is_some(),
                ee_path_length: ee,
                wall_time: t0.elapsed().as_secs_f64(),
                tree_size,
                iterations,
            },
            path,
        }
    }
}

/// End-effector distance travelled along straight joint-space edges, each
/// sub-sampled at the standard edge step.
pub fn ee_path_length(configs: &[JointConfig], robot: &RobotGeometry) -> f64 {
    configs.windows(2).map(|w| ee_edge_length(&w[0], &w[1], robot, DEFAULT_EDGE_STEP)).sum()
}

pub(crate) fn ee_edge_length(a: &JointConfig, b: &JointConfig, robot: &RobotGeometry, step: f64) -> f64 {
    let n = edge_subdivisions(a, b, step);
    let mut prev = fk_unchecked(a, robot)[DOF];
    let mut total = 0.0;
    for i in 1..=n {
        let p = fk_unchecked(&a.lerp(b, i as f64 / n as f64), robot)[DOF];
        total += (p - prev).norm();
        prev = p;
    }
    total
}

fn sample_config(robot: &RobotGeometry, rng: &mut impl Rng) -> JointConfig {
    JointConfig::new(std::array::from_fn(|i| {
        let [lo, hi] = robot.joint_limits[i];
        rng.random_range(lo..=hi)
    }))
}

/// Moves from `from` toward `to` by at most `step` (Euclidean).
fn steer(from: &JointConfig, to: &JointConfig, step: f64) -> JointConfig {
    let d = from.distance(to);
    if d <= step {
        *to
    } else {
        from.lerp(to, step / d)
    }
}

fn nearest(nodes: &[JointConfig], q: &JointConfig) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, n) in nodes.iter().enumerate() {
        let d = n.distance(q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn trace(nodes: &[JointConfig], parent: &[usize], mut i: usize, goal: &JointConfig) -> Vec<JointConfig> {
    let mut out = vec![nodes[i]];
    while i != 0 {
        i = parent[i];
        out.push(nodes[i]);
    }
    out.reverse();
    if out.last() != Some(goal) {
        out.push(*goal);
    }
    out
}

/// Handles `start ≈ goal`: the trivial path if the direct edge is free.
fn trivial(req: &PlanRequest<'_>) -> Option<Path> {
    if req.start == req.goal {
        return Some(Path::new(vec![req.start]));
    }
    (req.start.max_norm_distance(&req.goal) <= req.params.goal_tolerance
        && !edge_in_collision_unchecked(&req.start, &req.goal, req.scene, req.params.edge_step))
    .then(|| Path::new(vec![req.start, req.goal]))
}

/// Goal-biased RRT; returns the first path that reaches the goal.
pub fn rrt_plan(req: &PlanRequest<'_>) -> Result<PlanOutcome> {
    req.validate()?;
    let t0 = Instant::now();
    let robot = &req.scene.robot;
    if let Some(p) = trivial(req) {
        return Ok(PlanOutcome::finish(Some(p), req, t0, 1, 0));
    }
    let prm = &req.params;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut nodes = vec![req.start];
    let mut parent = vec![0usize];
    for it in 1..=prm.iteration_budget {
        let target = if rng.random::<f64>() < prm.goal_bias {
            req.goal
        } else {
            sample_config(robot, &mut rng)
        };
        let near = nearest(&nodes, &target);
        let new = steer(&nodes[near], &target, prm.step_size);
        if edge_in_collision_unchecked(&nodes[near], &new, req.scene, prm.edge_step) {
            continue;
        }
        nodes.push(new);
        parent.push(near);
        if new.max_norm_distance(&req.goal) <= prm.goal_tolerance
            && (new == req.goal || !edge_in_collision_unchecked(&new, &req.goal, req.scene, prm.edge_step))
        {
            let path = Path::new(trace(&nodes, &parent, nodes.len() - 1, &req.goal));
            return Ok(PlanOutcome::finish(Some(path), req, t0, nodes.len(), it));
        }
    }
    Ok(PlanOutcome::finish(None, req, t0, nodes.len(), prm.iteration_budget))
}

/// RRT* with a shrinking rewiring radius `γ (ln n / n)^(1/6)`.
/// Runs the full budget unless the stop ratio is met.
pub fn rrt_star_plan(req: &PlanRequest<'_>) -> Result<PlanOutcome> {
    req.validate()?;
    let t0 = Instant::now();
    let robot = &req.scene.robot;
    if let Some(p) = trivial(req) {
        return Ok(PlanOutcome::finish(Some(p), req, t0, 1, 0));
    }
    let prm = &req.params;
    let scene = req.scene;
    let reference = req.start.distance(&req.goal);
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut nodes = vec![req.start];
    let mut parent = vec![0usize];
    let mut cost = vec![0.0f64];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut goal_nodes: Vec<usize> = Vec::new();
    let mut iterations = 0;

    let best_goal = |goal_nodes: &[usize], nodes: &[JointConfig], cost: &[f64]| -> Option<(usize, f64)> {
        goal_nodes
            .iter()
            .map(|&g| (g, cost[g] + nodes[g].distance(&req.goal)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };

    for it in 1..=prm.iteration_budget {
        iterations = it;
        let target = if rng.random::<f64>() < prm.goal_bias {
            req.goal
        } else {
            sample_config(robot, &mut rng)
        };
        let near_idx = nearest(&nodes, &target);
        let new = steer(&nodes[near_idx], &target, prm.step_size);
        if edge_in_collision_unchecked(&nodes[near_idx], &new, scene, prm.edge_step) {
            continue;
        }
        let n = nodes.len() as f64 + 1.0;
        let radius = prm.rewire_gamma * (n.ln() / n).powf(1.0 / DOF as f64);
        let near: Vec<(usize, f64)> = nodes
            .iter()
            .enumerate()
            .filter_map(|(i, q)| {
                let d = q.distance(&new);
                (d <= radius).then_some((i, d))
            })
            .collect();

        // cheapest collision-free parent; the nearest node is already known free
        let mut best_parent = near_idx;
        let mut best_cost = cost[near_idx] + nodes[near_idx].distance(&new);
        let mut cands: Vec<(usize, f64)> = near
            .iter()
            .filter(|(i, _)| *i != near_idx)
            .map(|&(i, d)| (i, cost[i] + d))
            .filter(|(_, c)| *c < best_cost)
            .collect();
        cands.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (i, c) in cands {
            if !edge_in_collision_unchecked(&nodes[i], &new, scene, prm.edge_step) {
                best_parent = i;
                best_cost = c;
                break;
            }
        }
        let new_idx = nodes.len();
        nodes.push(new);
        parent.push(best_parent);
        cost.push(best_cost);
        children.push(Vec::new());
        children[best_parent].push(new_idx);

        for &(i, d) in &near {
            if i == best_parent || i == 0 {
                continue;
            }
            let through = best_cost + d;
            if through + 1e-12 < cost[i] && !edge_in_collision_unchecked(&new, &nodes[i], scene, prm.edge_step) {
                let old_parent = parent[i];
                children[old_parent].retain(|&c| c != i);
                parent[i] = new_idx;
                children[new_idx].push(i);
                let delta = cost[i] - through;
                let mut stack = vec![i];
                while let Some(j) = stack.pop() {
                    cost[j] -= delta;
                    stack.extend_from_slice(&children[j]);
                }
            }
        }

        if new.max_norm_distance(&req.goal) <= prm.goal_tolerance
            && (new == req.goal || !edge_in_collision_unchecked(&new, &req.goal, scene, prm.edge_step))
        {
            goal_nodes.push(new_idx);
        }
        if let (Some(ratio), Some((_, c))) = (prm.stop_ratio, best_goal(&goal_nodes, &nodes, &cost)) {
            if c <= ratio * reference {
                break;
            }
        }
    }
    let path = best_goal(&goal_nodes, &nodes, &cost).map(|(g, _)| Path::new(trace(&nodes, &parent, g, &req.goal)));
    Ok(PlanOutcome::finish(path, req, t0, nodes.len(), iterations))
}

/// Random-pair shortcutting; a shortcut is kept only if its edge is free
/// and it shortens the end-effector trace.
pub fn shortcut_path(path: &Path, scene: &Scene, attempts: usize, seed: u64, edge_step: f64) -> Result<Path> {
    for c in &path.configs {
        scene.robot.check_limits(c)?;
    }
    let robot = &scene.robot;
    let mut configs = path.configs.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..attempts {
        if configs.len() < 3 {
            break;
        }
        let i = rng.random_range(0..configs.len() - 2);
        let j = rng.random_range(i + 2..configs.len());
        let old: f64 = configs[i..=j]
            .windows(2)
            .map(|w| ee_edge_length(&w[0], &w[1], robot, DEFAULT_EDGE_STEP))
            .sum();
        let new = ee_edge_length(&configs[i], &configs[j], robot, DEFAULT_EDGE_STEP);
        if new < old
            && !edge_in_collision_unchecked(&configs[i], &configs[j], scene, edge_step)
            && edge_certified(&configs[i], &configs[j], scene, edge_step)
        {
            configs.drain(i + 1..j);
        }
    }
    Ok(Path { configs, dt: path.dt })
}

/// Splits every edge into equal pieces of at most `max_step` (max-norm).
pub fn resample_path(path: &Path, max_step: f64) -> Path {
    assert!(max_step > 0.0);
    let mut out = Vec::with_capacity(path.len());
    if let Some(first) = path.configs.first() {
        out.push(*first);
    }
    for w in path.configs.windows(2) {
        let n = (w[0].max_norm_distance(&w[1]) / max_step).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(if k == n { w[1] } else { w[0].lerp(&w[1], k as f64 / n as f64) });
        }
    }
    Path { configs: out, dt: path.dt }
}

/// Samples a collision-free configuration within the robot limits.
pub fn sample_free_config(scene: &Scene, rng: &mut impl Rng, max_tries: usize) -> Option<JointConfig> {
    (0..max_tries)
        .map(|_| sample_config(&scene.robot, rng))
        .find(|c| !scene.config_in_collision_unchecked(c))
}

/// What the planner network sees besides the robot state and the static
/// scene: the goal and, in dynamic scenes, the predicted arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub goal: JointConfig,
    pub human: Option<PredictedArm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertSample {
    pub scene_id: usize,
    pub path_id: usize,
    pub snapshot: Snapshot,
    pub c_i: JointConfig,
    pub c_next: JointConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub scenarios_per_workspace: usize,
    pub planner: PlannerParams,
    pub shortcut_attempts: usize,
    /// Max-norm joint displacement between labelled steps.
    pub label_step: f64,
    /// Fraction of scenarios that include a predicted human arm.
    pub human_fraction: f64,
    pub human_margin: f64,
    /// Also emit every path traversed backwards (goal and start swapped).
    pub include_reversed: bool,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            scenarios_per_workspace: 200,
            planner: PlannerParams {
                iteration_budget: 3000,
                ..Default::default()
            },
            shortcut_attempts: 150,
            label_step: 0.1,
            human_fraction: 0.5,
            human_margin: 0.05,
            include_reversed: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpertDataset {
    pub samples: Vec<ExpertSample>,
    pub paths: usize,
    pub skipped: usize,
}

impl ExpertDataset {
    pub fn write_jsonl(&self, path: &FsPath) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &FsPath) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut samples = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str::<ExpertSample>(&line)?);
        }
        let paths = samples.iter().map(|s| s.path_id + 1).max().unwrap_or(0);
        Ok(Self {
            samples,
            paths,
            skipped: 0,
        })
    }
}

/// Seeded start/goal pairs per workspace, planned with RRT*, shortcut,
/// resampled to `label_step`, and unrolled into one-step labels.
pub fn generate_expert_dataset(
    workspaces: &[Scene],
    humans: &[PredictedArm],
    p_h: &AnthropometricParams,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<ExpertDataset> {
    if !(cfg.label_step > 0.0) || !(0.0..=1.0).contains(&cfg.human_fraction) {
        return Err(Error::Config("expert label_step must be positive and human_fraction in [0, 1]".into()));
    }
    let mut out = ExpertDataset::default();
    for (scene_id, ws) in workspaces.iter().enumerate() {
        ws.robot.validate()?;
        for s in 0..cfg.scenarios_per_workspace {
            let scenario_seed = seed ^ ((scene_id as u64) << 48) ^ (s as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
            let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
            let human = (!humans.is_empty() && rng.random::<f64>() < cfg.human_fraction)
                .then(|| humans[rng.random_range(0..humans.len())].clone());
            let scene = match &human {
                Some(h) => ws.clone().with_human(h.capsules(p_h, cfg.human_margin)),
                None => ws.clone(),
            };
            let (Some(start), Some(goal)) = (sample_free_config(&scene, &mut rng, 200), sample_free_config(&scene, &mut rng, 200))
            else {
                out.skipped += 1;
                continue;
            };
            let req = PlanRequest {
                start,
                goal,
                scene: &scene,
                params: cfg.planner,
                seed: rng.random(),
            };
            let Some(path) = rrt_star_plan(&req)?.path else {
                log::debug!("expert scenario {scene_id}/{s} timed out");
                out.skipped += 1;
                continue;
            };
            let path = shortcut_path(&path, &scene, cfg.shortcut_attempts, rng.random(), cfg.planner.edge_step)?;
            let path = resample_path(&path, cfg.label_step);
            if path.len() < 2 || !path.is_certified(&scene, cfg.planner.edge_step)? {
                out.skipped += 1;
                continue;
            }
            let mut emit = |configs: &[JointConfig], goal: JointConfig| {
                let path_id = out.paths;
                out.paths += 1;
                for w in configs.windows(2) {
                    out.samples.push(ExpertSample {
                        scene_id,
                        path_id,
                        snapshot: Snapshot {
                            goal,
                            human: human.clone(),
                        },
                        c_i: w[0],
                        c_next: w[1],
                    });
                }
            };
            emit(&path.configs, goal);
            if cfg.include_reversed {
                let rev: Vec<JointConfig> = path.configs.iter().rev().copied().collect();
                emit(&rev, start);
            }
        }
    }
    Ok(out)
}
