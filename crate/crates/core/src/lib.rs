//! Human-aware motion planning for a 6-DOF manipulator.
//!
//! The crate combines an LSTM bone-vector predictor of the human arm, Monte
//! Carlo dropout for predictive uncertainty, a workspace graph encoding the
//! robot, obstacles and predicted arm poses, and a graph-convolutional
//! planner trained to imitate RRT* demonstrations.

pub mod arm_models;
pub mod collision;
pub mod error;
pub mod gnn_planner;
pub mod harness;
pub mod human_synth;
pub mod nn;
pub mod oracle_planners;
pub mod predictor;
pub mod workspace_graph;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
