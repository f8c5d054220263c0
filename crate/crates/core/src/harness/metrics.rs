use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::arm_models::JointConfig;
use crate::collision::{config_in_collision, Scene};
use crate::error::Result;
use crate::oracle_planners::Path;

/// One row of a metrics CSV. Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario_id: String,
    pub workspace: String,
    pub planner: String,
    pub human_mode: String,
    pub success: bool,
    /// Returned path passed the independent fine-step re-check.
    pub valid: bool,
    pub collisions: usize,
    pub ee_path_length: f64,
    pub planning_time: f64,
    pub mean_abs_accel: Option<f64>,
    pub mean_abs_jerk: Option<f64>,
    pub replan_count: usize,
    pub first_replan_time: Option<f64>,
}

pub const METRICS_COLUMNS: [&str; 13] = [
    "scenario_id",
    "workspace",
    "planner",
    "human_mode",
    "success",
    "valid",
    "collisions",
    "ee_path_length",
    "planning_time",
    "mean_abs_accel",
    "mean_abs_jerk",
    "replan_count",
    "first_replan_time",
];

pub fn write_metrics_csv(path: &FsPath, rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(METRICS_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))
}

pub fn read_metrics_csv(path: &FsPath) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Independent re-check of a path: every edge sampled uniformly with
/// spacing at most `step` (max-norm), each sample checked on its own.
pub fn revalidate_path(path: &Path, scene: &Scene, step: f64) -> Result<bool> {
    if let [only] = path.configs.as_slice() {
        return Ok(!config_in_collision(only, scene)?);
    }
    for w in path.configs.windows(2) {
        let n = (w[0].max_norm_distance(&w[1]) / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            if config_in_collision(&w[0].lerp(&w[1], k as f64 / n as f64), scene)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Mean absolute second and third finite differences over joints and
/// steps, divided by dt² and dt³. `None` when the trajectory is too short.
pub fn smoothness(traj: &[JointConfig], dt: f64) -> (Option<f64>, Option<f64>) {
    let mean_abs = |order: usize| -> Option<f64> {
        if traj.len() <= order {
            return None;
        }
        let coeffs: &[f64] = match order {
            2 => &[1.0, -2.0, 1.0],
            _ => &[-1.0, 3.0, -3.0, 1.0],
        };
        let mut sum = 0.0;
        let mut n = 0usize;
        for win in traj.windows(order + 1) {
            for j in 0..crate::arm_models::DOF {
                let d: f64 = win.iter().zip(coeffs).map(|(c, k)| c[j] * k).sum();
                sum += d.abs();
                n += 1;
            }
        }
        Some(sum / n as f64 / dt.powi(order as i32))
    };
    (mean_abs(2), mean_abs(3))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Sample mean and standard deviation; NaN mean for an empty slice.
pub fn mean_std(xs: &[f64]) -> MeanStd {
    if xs.is_empty() {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}
