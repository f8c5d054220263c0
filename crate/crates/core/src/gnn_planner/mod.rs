//! One-step imitation planner on workspace graphs, and the bidirectional
//! online planner built on it.
//!
//! The network output is a joint displacement in normalized units
//! (radians / `schema.angle_scale`); the proposed configuration is
//! `c + raw · angle_scale`.

mod gcn;

pub use gcn::{gnn_forward, gradient_check, GcnLayer, GnnWeights, SparseAdj, GNN_VERSION, OUTPUT_DIM};

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm_models::{JointConfig, DOF};
use crate::collision::{edge_certified, edge_in_collision_unchecked, Scene, DEFAULT_EDGE_STEP};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, EpochStats, Parameters};
use crate::oracle_planners::{ee_path_length, ExpertDataset, Path, PlanOutcome, PlanStats};
use crate::workspace_graph::{build_graph, schema_adjacency, GraphSchema, PredictedArm};

/// Imitation loss: squared errors summed within each path, averaged over paths.
pub fn planner_loss(preds: &[[f64; DOF]], labels: &[[f64; DOF]], path_ids: &[usize]) -> f64 {
    assert!(preds.len() == labels.len() && labels.len() == path_ids.len());
    if preds.is_empty() {
        return 0.0;
    }
    let paths: BTreeSet<usize> = path_ids.iter().copied().collect();
    let total: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| p.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    total / paths.len() as f64
}

/// A training pair with its graph features already built.
#[derive(Clone, Debug)]
pub struct PlannerExample {
    pub features: Array2<f64>,
    pub topology: (usize, bool),
    /// Normalized displacement `(c_next − c_i) / angle_scale`.
    pub target: [f64; DOF],
    pub path_id: usize,
}

pub fn prepare_examples(data: &ExpertDataset, workspaces: &[Scene], schema: &GraphSchema) -> Result<Vec<PlannerExample>> {
    data.samples
        .iter()
        .map(|s| {
            let scene = workspaces
                .get(s.scene_id)
                .ok_or_else(|| Error::Dataset(format!("expert sample refers to unknown scene {}", s.scene_id)))?;
            let g = build_graph(&s.c_i, &s.snapshot.goal, scene, s.snapshot.human.as_ref(), schema, &scene.robot)?;
            Ok(PlannerExample {
                features: g.features,
                topology: g.topology,
                target: std::array::from_fn(|j| (s.c_next[j] - s.c_i[j]) / schema.angle_scale),
                path_id: s.path_id,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerTrainConfig {
    pub widths: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of paths held out for validation.
    pub val_fraction: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for PlannerTrainConfig {
    fn default() -> Self {
        Self {
            widths: vec![64; 5],
            lr: 1e-3,
            batch_size: 64,
            epochs: 40,
            val_fraction: 0.1,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl PlannerTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("planner widths must be non-empty and positive".into()));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 || !(self.clip_norm > 0.0) {
            return Err(Error::Config("planner lr, batch_size and clip_norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("planner val_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PlannerTrainReport {
    pub weights: GnnWeights,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
}

/// Caches the propagation operator per graph topology.
struct AdjCache<'a> {
    schema: &'a GraphSchema,
    map: HashMap<(usize, bool), SparseAdj>,
}

impl<'a> AdjCache<'a> {
    fn new(schema: &'a GraphSchema) -> Self {
        Self {
            schema,
            map: HashMap::new(),
        }
    }

    fn get(&mut self, key: (usize, bool)) -> &SparseAdj {
        let schema = self.schema;
        self.map
            .entry(key)
            .or_insert_with(|| SparseAdj::normalized(&schema_adjacency(schema, key.0, key.1)))
    }

    fn batch(&mut self, examples: &[&PlannerExample]) -> (Array2<f64>, SparseAdj, Vec<usize>) {
        for e in examples {
            self.get(e.topology);
        }
        let blocks: Vec<&SparseAdj> = examples.iter().map(|e| &self.map[&e.topology]).collect();
        let adj = SparseAdj::block_diag(&blocks);
        let views: Vec<_> = examples.iter().map(|e| e.features.view()).collect();
        let x = ndarray::concatenate(Axis(0), &views).expect("equal widths");
        let mut offsets = vec![0];
        for e in examples {
            offsets.push(offsets.last().unwrap() + e.features.nrows());
        }
        (x, adj, offsets)
    }
}

fn targets(examples: &[&PlannerExample]) -> Array2<f64> {
    Array2::from_shape_fn((examples.len(), DOF), |(i, j)| examples[i].target[j])
}

fn eval_loss(w: &GnnWeights, examples: &[&PlannerExample], cache: &mut AdjCache<'_>, batch: usize) -> f64 {
    if examples.is_empty() {
        return f64::NAN;
    }
    let paths: BTreeSet<usize> = examples.iter().map(|e| e.path_id).collect();
    let mut sum = 0.0;
    for chunk in examples.chunks(batch) {
        let (x, adj, offsets) = cache.batch(chunk);
        let (out, _) = gcn::forward_batch(w, &x, &adj, &offsets, false);
        sum += (&out - &targets(chunk)).mapv(|v| v * v).sum();
    }
    sum / paths.len() as f64
}

/// Seeded mini-batch Adam on the imitation loss; validation paths are a seeded
/// random subset of path ids. Returns the best-validation weights.
pub fn train_planner(examples: &[PlannerExample], cfg: &PlannerTrainConfig, schema: &GraphSchema) -> Result<PlannerTrainReport> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Dataset("planner training needs a non-empty expert dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut path_ids: Vec<usize> = examples.iter().map(|e| e.path_id).collect::<BTreeSet<_>>().into_iter().collect();
    path_ids.shuffle(&mut rng);
    let n_val = ((path_ids.len() as f64) * cfg.val_fraction).round() as usize;
    let val_paths: BTreeSet<usize> = path_ids[..n_val.min(path_ids.len().saturating_sub(1))].iter().copied().collect();
    let (val, train): (Vec<&PlannerExample>, Vec<&PlannerExample>) =
        examples.iter().partition(|e| val_paths.contains(&e.path_id));
    // with no held-out paths the training set doubles as validation
    let val = if val.is_empty() { train.clone() } else { val };

    let mut cache = AdjCache::new(schema);
    let mut w = GnnWeights::init(&cfg.widths, cfg.seed ^ 0x6C6E_7070);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        &w,
    );
    let eval_batch = cfg.batch_size.max(128);
    let initial = eval_loss(&w, &val, &mut cache, eval_batch);
    let mut best = (w.clone(), initial, 0usize);
    let mut curve = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let train_paths = train.iter().map(|e| e.path_id).collect::<BTreeSet<_>>().len() as f64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&PlannerExample> = chunk.iter().map(|&i| train[i]).collect();
            let (x, adj, offsets) = cache.batch(&items);
            let (out, gc) = gcn::forward_batch(&w, &x, &adj, &offsets, true);
            let diff = &out - &targets(&items);
            let n_paths = items.iter().map(|e| e.path_id).collect::<BTreeSet<_>>().len() as f64;
            let sq = diff.mapv(|v| v * v).sum();
            let loss = sq / n_paths;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let d_out = diff * (2.0 / n_paths);
            let mut grads = gcn::backward(&w, gc.as_ref().expect("cache requested"), &adj, &offsets, &d_out);
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(Error::Divergence { epoch, loss: norm });
            }
            if norm > cfg.clip_norm {
                grads.scale(cfg.clip_norm / norm);
            }
            opt.update(&mut w, &grads);
            sq_sum += sq;
        }
        let val_loss = eval_loss(&w, &val, &mut cache, eval_batch);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: val_loss });
        }
        // loss over the whole training split, comparable with val_loss
        let train_loss = sq_sum / train_paths;
        log::debug!("planner epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 {
            best = (w.clone(), val_loss, epoch);
        }
    }
    Ok(PlannerTrainReport {
        weights: best.0,
        curve,
        best_epoch: best.2,
        initial_val_loss: initial,
        best_val_loss: best.1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerStep {
    pub next: JointConfig,
    pub raw: [f64; DOF],
}

/// Scales a displacement down to `max_step` in max-norm, keeping direction.
fn clamp_step(c: &JointConfig, delta: [f64; DOF], max_step: f64, scene: &Scene) -> JointConfig {
    let m = delta.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let s = if m > max_step { max_step / m } else { 1.0 };
    scene.robot.clamp_to_limits(&c.add(&delta.map(|d| d * s)))
}

pub fn plan_step(
    c: &JointConfig,
    goal: &JointConfig,
    scene: &Scene,
    pred: Option<&PredictedArm>,
    w: &GnnWeights,
    schema: &GraphSchema,
    max_step: f64,
) -> Result<PlannerStep> {
    let g = build_graph(c, goal, scene, pred, schema, &scene.robot)?;
    let raw = gnn_forward(&g, w)?;
    let delta = raw.map(|r| r * schema.angle_scale);
    Ok(PlannerStep {
        next: clamp_step(c, delta, max_step, scene),
        raw,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BidirectionalOptions {
    pub max_iters: usize,
    pub max_step: f64,
    pub edge_step: f64,
    pub perturb_samples: usize,
    pub stuck_iters: usize,
    pub stuck_tolerance: f64,
    pub seed: u64,
}

impl Default for BidirectionalOptions {
    fn default() -> Self {
        Self {
            max_iters: 150,
            max_step: 0.1,
            edge_step: DEFAULT_EDGE_STEP,
            perturb_samples: 10,
            stuck_iters: 10,
            stuck_tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Why a bidirectional query ended without a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BidirectionalFailure {
    Timeout,
    Stuck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BidirectionalOutcome {
    pub outcome: PlanOutcome,
    pub failure: Option<BidirectionalFailure>,
}

struct Branch {
    nodes: Vec<JointConfig>,
}

impl Branch {
    fn tip(&self) -> JointConfig {
        *self.nodes.last().expect("branch starts non-empty")
    }
}

/// Sampled check first, then the full-length certificate.
fn edge_ok(a: &JointConfig, b: &JointConfig, scene: &Scene, step: f64) -> bool {
    !edge_in_collision_unchecked(a, b, scene, step) && edge_certified(a, b, scene, step)
}

/// Extends `branch` one step toward `target`; falls back to random
/// perturbations of the proposed step when it collides.
#[allow(clippy::too_many_arguments)]
fn extend(
    branch: &mut Branch,
    target: &JointConfig,
    scene: &Scene,
    pred: Option<&PredictedArm>,
    w: &GnnWeights,
    schema: &GraphSchema,
    opts: &BidirectionalOptions,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let tip = branch.tip();
    let step = plan_step(&tip, target, scene, pred, w, schema, opts.max_step)?;
    if edge_ok(&tip, &step.next, scene, opts.edge_step) {
        branch.nodes.push(step.next);
        return Ok(tip.max_norm_distance(&step.next));
    }
    let proposed = step.next.sub(&tip);
    for _ in 0..opts.perturb_samples {
        let delta: [f64; DOF] = std::array::from_fn(|j| proposed[j] + rng.random_range(-opts.max_step..opts.max_step));
        let cand = clamp_step(&tip, delta, opts.max_step, scene);
        if edge_ok(&tip, &cand, scene, opts.edge_step) {
            branch.nodes.push(cand);
            return Ok(tip.max_norm_distance(&cand));
        }
    }
    Ok(0.0)
}

/// Grows one branch from each end with the network, each aiming at the
/// other's tip, and stitches them once the tips see each other.
pub fn plan_bidirectional(
    start: &JointConfig,
    goal: &JointConfig,
    scene: &Scene,
    pred: Option<&PredictedArm>,
    w: &GnnWeights,
    schema: &GraphSchema,
    opts: &BidirectionalOptions,
) -> Result<BidirectionalOutcome> {
    let t0 = Instant::now();
    for c in [start, goal] {
        scene.robot.check_limits(c)?;
        if scene.config_in_collision_unchecked(c) {
            return Err(Error::InvalidRequest("bidirectional endpoints must be collision-free".into()));
        }
    }
    let done = |configs: Vec<JointConfig>, iterations: usize, nodes: usize| BidirectionalOutcome {
        outcome: PlanOutcome {
            stats: PlanStats {
                success: true,
                ee_path_length: ee_path_length(&configs, &scene.robot),
                wall_time: t0.elapsed().as_secs_f64(),
                tree_size: nodes,
                iterations,
            },
            path: Some(Path::new(configs)),
        },
        failure: None,
    };
    if start == goal {
        return Ok(done(vec![*start], 0, 1));
    }
    if edge_ok(start, goal, scene, opts.edge_step) {
        return Ok(done(vec![*start, *goal], 0, 2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut a = Branch { nodes: vec![*start] };
    let mut b = Branch { nodes: vec![*goal] };
    let mut stuck = 0;
    let stitch = |a: &Branch, b: &Branch| {
        let mut v = a.nodes.clone();
        v.extend(b.nodes.iter().rev());
        v
    };
    for it in 1..=opts.max_iters {
        let b_tip = b.tip();
        let moved_a = extend(&mut a, &b_tip, scene, pred, w, schema, opts, &mut rng)?;
        if edge_ok(&a.tip(), &b.tip(), scene, opts.edge_step) {
            let n = a.nodes.len() + b.nodes.len();
            return Ok(done(stitch(&a, &b), it, n));
        }
        let a_tip = a.tip();
        let moved_b = extend(&mut b, &a_tip, scene, pred, w, schema, opts, &mut rng)?;
        if edge_ok(&a.tip(), &b.tip(), scene, opts.edge_step) {
            let n = a.nodes.len() + b.nodes.len();
            return Ok(done(stitch(&a, &b), it, n));
        }
        if moved_a.max(moved_b) < opts.stuck_tolerance {
            stuck += 1;
            if stuck >= opts.stuck_iters {
                return Ok(failed(t0, a.nodes.len() + b.nodes.len(), it, BidirectionalFailure::Stuck));
            }
        } else {
            stuck = 0;
        }
    }
    Ok(failed(t0, a.nodes.len() + b.nodes.len(), opts.max_iters, BidirectionalFailure::Timeout))
}

fn failed(t0: Instant, nodes: usize, iterations: usize, why: BidirectionalFailure) -> BidirectionalOutcome {
    BidirectionalOutcome {
        outcome: PlanOutcome {
            path: None,
            stats: PlanStats {
                success: false,
                ee_path_length: 0.0,
                wall_time: t0.elapsed().as_secs_f64(),
                tree_size: nodes,
                iterations,
            },
        },
        failure: Some(why),
    }
}

/// True iff any remaining edge (or a lone remaining configuration) hits the scene.
pub fn replan_trigger(remainder: &Path, scene: &Scene, edge_step: f64) -> bool {
    match remainder.configs.as_slice() {
        [] => false,
        [only] => scene.config_in_collision_unchecked(only),
        cs => cs.windows(2).any(|w| edge_in_collision_unchecked(&w[0], &w[1], scene, edge_step)),
    }
}
