//! Planning snapshot → node features `H` (T×6) and adjacency `A` (T×T).
//!
//! Node order: 6 current joints, 6 goal joints, obstacle slots, then human
//! nodes sample-major (`k`, horizon, elbow/wrist). Every node carries
//! `[x, y, z, scalar, group code, presence]`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::arm_models::{arm_capsules, forward_kinematics, AnthropometricParams, ArmJointPositions, JointConfig, RobotGeometry, DOF};
use crate::collision::{Capsule, Scene};
use crate::error::{Error, Result};
use crate::predictor::{prediction_to_poses, UncertainPrediction};
use crate::Vec3;

pub const FEATURE_WIDTH: usize = 6;

pub const CODE_OBSTACLE: f64 = 2.0;
pub const CODE_HUMAN: f64 = 3.0;

/// Group code of robot joint `i`; goal joints mirror the sign so the two
/// chains stay distinguishable after sum pooling.
pub fn joint_code(i: usize, goal: bool) -> f64 {
    let c = 1.0 + 0.1 * i as f64;
    if goal {
        -c
    } else {
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSchema {
    pub k_samples: usize,
    /// Prediction steps represented as human nodes.
    pub horizons: Vec<usize>,
    pub max_obstacles: usize,
    pub workspace_radius: f64,
    pub angle_scale: f64,
    pub sigma_scale: f64,
}

impl Default for GraphSchema {
    fn default() -> Self {
        Self {
            k_samples: 5,
            horizons: vec![0, 16, 33, 49],
            max_obstacles: 3,
            workspace_radius: 1.0,
            angle_scale: PI,
            sigma_scale: 0.1,
        }
    }
}

impl GraphSchema {
    pub fn validate(&self) -> Result<()> {
        if self.k_samples < 1 || self.horizons.is_empty() {
            return Err(Error::Config("graph schema needs at least one sample and one horizon".into()));
        }
        if !(self.workspace_radius > 0.0 && self.angle_scale > 0.0 && self.sigma_scale > 0.0) {
            return Err(Error::Config("graph schema scales must be positive".into()));
        }
        Ok(())
    }

    pub fn human_nodes(&self) -> usize {
        self.k_samples * self.horizons.len() * 2
    }

    pub fn node_count(&self) -> usize {
        2 * DOF + self.max_obstacles + self.human_nodes()
    }

    pub fn current_node(&self, joint: usize) -> usize {
        joint
    }

    pub fn goal_node(&self, joint: usize) -> usize {
        DOF + joint
    }

    pub fn obstacle_node(&self, slot: usize) -> usize {
        2 * DOF + slot
    }

    /// `joint` 0 = elbow, 1 = wrist.
    pub fn human_node(&self, sample: usize, horizon: usize, joint: usize) -> usize {
        2 * DOF + self.max_obstacles + (sample * self.horizons.len() + horizon) * 2 + joint
    }
}

/// Reconstructed human arm samples at the schema horizons plus the
/// positional spread per horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedArm {
    pub k: usize,
    pub horizons: Vec<usize>,
    /// `[k * horizons.len() + h]`
    pub poses: Vec<ArmJointPositions>,
    /// `[h] -> [elbow, wrist]` in metres.
    pub sigma: Vec<[f64; 2]>,
}

impl PredictedArm {
    pub fn from_prediction(pred: &UncertainPrediction, p_h: &AnthropometricParams, horizons: &[usize]) -> Result<Self> {
        let per_h = prediction_to_poses(pred, p_h, horizons)?;
        let k = pred.k();
        let mut poses = Vec::with_capacity(k * horizons.len());
        for s in 0..k {
            for row in &per_h {
                poses.push(row[s]);
            }
        }
        Ok(Self {
            k,
            horizons: horizons.to_vec(),
            poses,
            sigma: horizons.iter().map(|&h| pred.joint_sigma(h, p_h)).collect(),
        })
    }

    /// Every sample and horizon equal to one observed pose.
    pub fn static_pose(joints: ArmJointPositions, k: usize, horizons: &[usize]) -> Self {
        Self {
            k,
            horizons: horizons.to_vec(),
            poses: vec![joints; k * horizons.len()],
            sigma: vec![[0.0; 2]; horizons.len()],
        }
    }

    pub fn pose(&self, sample: usize, horizon: usize) -> &ArmJointPositions {
        &self.poses[sample * self.horizons.len() + horizon]
    }

    /// Two capsules per stored pose.
    pub fn capsules(&self, p_h: &AnthropometricParams, margin: f64) -> Vec<Capsule> {
        self.poses.iter().flat_map(|p| arm_capsules(p, p_h, margin)).collect()
    }

    fn check(&self, schema: &GraphSchema) -> Result<()> {
        if self.k != schema.k_samples || self.horizons.len() != schema.horizons.len() {
            return Err(Error::SchemaMismatch(format!(
                "prediction has {} samples × {} horizons, schema expects {} × {}",
                self.k,
                self.horizons.len(),
                schema.k_samples,
                schema.horizons.len()
            )));
        }
        if self.poses.len() != self.k * self.horizons.len() || self.sigma.len() != self.horizons.len() {
            return Err(Error::SchemaMismatch("prediction arrays are inconsistent".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkspaceGraph {
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    /// Present obstacle slots and whether human nodes are live; the
    /// adjacency depends on nothing else.
    pub topology: (usize, bool),
}

impl WorkspaceGraph {
    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }
}

fn connect(a: &mut Array2<f64>, i: usize, j: usize) {
    a[[i, j]] = 1.0;
    a[[j, i]] = 1.0;
}

/// Adjacency for a schema given how many obstacle slots are filled and
/// whether a prediction is present.
pub fn schema_adjacency(schema: &GraphSchema, obstacles: usize, human: bool) -> Array2<f64> {
    let t = schema.node_count();
    let mut a = Array2::zeros((t, t));
    for i in 0..DOF - 1 {
        connect(&mut a, schema.current_node(i), schema.current_node(i + 1));
        connect(&mut a, schema.goal_node(i), schema.goal_node(i + 1));
    }
    for i in 0..DOF {
        connect(&mut a, schema.current_node(i), schema.goal_node(i));
    }
    for slot in 0..obstacles {
        for i in 0..DOF {
            connect(&mut a, schema.obstacle_node(slot), schema.current_node(i));
        }
    }
    let nh = schema.horizons.len();
    for k in 0..schema.k_samples {
        for h in 0..nh {
            connect(&mut a, schema.human_node(k, h, 0), schema.human_node(k, h, 1));
            if h + 1 < nh {
                for j in 0..2 {
                    connect(&mut a, schema.human_node(k, h, j), schema.human_node(k, h + 1, j));
                }
            }
            if human {
                for j in 0..2 {
                    for i in 0..DOF {
                        connect(&mut a, schema.human_node(k, h, j), schema.current_node(i));
                    }
                }
            }
        }
    }
    a
}

pub fn build_graph(
    config: &JointConfig,
    goal: &JointConfig,
    scene: &Scene,
    pred: Option<&PredictedArm>,
    schema: &GraphSchema,
    robot: &RobotGeometry,
) -> Result<WorkspaceGraph> {
    if scene.static_boxes.len() > schema.max_obstacles {
        return Err(Error::SchemaMismatch(format!(
            "scene has {} boxes, schema holds {}",
            scene.static_boxes.len(),
            schema.max_obstacles
        )));
    }
    if let Some(p) = pred {
        p.check(schema)?;
    }
    let base = Vec3::from(robot.base_frame.translation);
    let r = schema.workspace_radius;
    let mut h = Array2::zeros((schema.node_count(), FEATURE_WIDTH));
    let mut put = |node: usize, pos: Vec3, scalar: f64, code: f64| {
        let p = (pos - base) / r;
        h.row_mut(node).assign(&Array1::from(vec![p.x, p.y, p.z, scalar, code, 1.0]));
    };

    for (cfg, is_goal) in [(config, false), (goal, true)] {
        let origins = forward_kinematics(cfg, robot)?;
        for i in 0..DOF {
            let node = if is_goal { schema.goal_node(i) } else { schema.current_node(i) };
            // distal end of link i
            put(node, origins[i + 1], cfg[i] / schema.angle_scale, joint_code(i, is_goal));
        }
    }
    for (slot, b) in scene.static_boxes.iter().enumerate() {
        put(schema.obstacle_node(slot), b.center(), b.half_extents().max() / r, CODE_OBSTACLE);
    }
    if let Some(p) = pred {
        for k in 0..schema.k_samples {
            for hz in 0..schema.horizons.len() {
                let pose = p.pose(k, hz);
                for (j, pos) in [pose.elbow, pose.wrist].into_iter().enumerate() {
                    let code = CODE_HUMAN + 0.1 * j as f64;
                    put(schema.human_node(k, hz, j), pos, p.sigma[hz][j] / schema.sigma_scale, code);
                }
            }
        }
    }
    let topology = (scene.static_boxes.len(), pred.is_some());
    Ok(WorkspaceGraph {
        features: h,
        adjacency: schema_adjacency(schema, topology.0, topology.1),
        topology,
    })
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn normalized_adjacency(a: &Array2<f64>) -> Array2<f64> {
    let t = a.nrows();
    let mut at = a.clone();
    for i in 0..t {
        at[[i, i]] += 1.0;
    }
    let d: Vec<f64> = at.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    Array2::from_shape_fn((t, t), |(i, j)| d[i] * at[[i, j]] * d[j])
}
