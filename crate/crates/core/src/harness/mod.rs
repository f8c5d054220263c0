//! Configuration, persistence and the benchmark, simulation and
//! uncertainty drivers behind the command-line tool.

pub mod config;
mod bench;
mod generate;
pub mod metrics;
pub mod scene_file;
mod sim;
mod train;
mod uncertainty;

use std::path::Path;

use serde::Serialize;

pub use bench::{cmd_benchmark, make_scenarios, run_planner, BenchmarkReport, GnnContext, PlannerSummary, Scenario};
pub use config::{HarnessConfig, HumanMode, OutputPaths, PlannerKind};
pub use generate::{build_human_dataset, cmd_generate, derived_seeds, expert_human_pool, surrogate_prediction, GenerateReport, SeedManifest};
pub use scene_file::{load_scenes, SceneFile};
pub use sim::{cmd_simulate, observation_window, sim_trajectories, summarize, ModeSummary, RunResult, SimContext, SimulationReport, SimulationSummary, TICK_DT};
pub use train::{cmd_train, TrainSummary, TrainTarget};
pub use uncertainty::{cmd_uncertainty_report, KSweepRow, UncertaintySummary};

use crate::arm_models::AnthropometricParams;
use crate::collision::Scene;
use crate::error::{Error, Result};
use crate::workspace_graph::GraphSchema;

/// The loaded scene files of a config and their static scenes.
#[derive(Clone, Debug)]
pub struct Workspaces {
    pub files: Vec<SceneFile>,
    pub scenes: Vec<Scene>,
}

impl Workspaces {
    pub fn load(cfg: &HarnessConfig) -> Result<Self> {
        let files = load_scenes(&cfg.scenes)?;
        let scenes = files.iter().map(SceneFile::scene).collect();
        Ok(Self { files, scenes })
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.files[0].schema
    }

    pub fn anthropometrics(&self) -> &AnthropometricParams {
        &self.files[0].anthropometrics
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
