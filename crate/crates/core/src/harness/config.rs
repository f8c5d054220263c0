use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn_planner::{BidirectionalOptions, PlannerTrainConfig};
use crate::human_synth::{DatasetSpec, MotionLabel, MotionScript};
use crate::oracle_planners::{ExpertConfig, PlannerParams};
use crate::predictor::{PredictorTrainConfig, DEFAULT_DROPOUT, DEFAULT_MC_SAMPLES};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Rrt,
    RrtStar,
    Gnn,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rrt => "rrt",
            Self::RrtStar => "rrt_star",
            Self::Gnn => "gnn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanMode {
    None,
    CurrentOnly,
    WithPrediction,
}

impl HumanMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::CurrentOnly => "current_only",
            Self::WithPrediction => "with_prediction",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanSection {
    pub dataset: DatasetSpec,
    /// Empty means the two default workstation motions.
    pub scripts: Vec<MotionScript>,
}

impl HumanSection {
    pub fn scripts(&self) -> Vec<MotionScript> {
        if self.scripts.is_empty() {
            vec![MotionScript::default_a(), MotionScript::default_b()]
        } else {
            self.scripts.clone()
        }
    }
}

/// Spread of the surrogate predictions embedded in expert snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertHumanSection {
    pub pool_size: usize,
    /// Bone-direction noise at the first and last predicted step, rad.
    pub sigma_start: f64,
    pub sigma_end: f64,
}

impl Default for ExpertHumanSection {
    fn default() -> Self {
        Self {
            pool_size: 64,
            sigma_start: 0.01,
            sigma_end: 0.12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSection {
    pub scenarios_per_workspace: usize,
    pub planners: Vec<PlannerKind>,
    pub rrt: PlannerParams,
    pub rrt_star: PlannerParams,
    pub gnn: BidirectionalOptions,
    /// Step for the independent re-validation of returned paths.
    pub validation_step: f64,
    /// Exit code 4 when any planner's failure rate exceeds this.
    pub failure_threshold: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            scenarios_per_workspace: 200,
            planners: vec![PlannerKind::Rrt, PlannerKind::RrtStar, PlannerKind::Gnn],
            rrt: PlannerParams::default(),
            rrt_star: PlannerParams {
                stop_ratio: Some(1.1),
                ..Default::default()
            },
            gnn: BidirectionalOptions::default(),
            validation_step: 0.0125,
            failure_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintySection {
    pub ks: Vec<usize>,
    pub dropout: f64,
    /// Test windows used for the K sweep and the correlation.
    pub windows: usize,
    pub repeats: usize,
}

impl Default for UncertaintySection {
    fn default() -> Self {
        Self {
            ks: vec![5, 10, 20],
            dropout: DEFAULT_DROPOUT,
            windows: 100,
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub runs: usize,
    pub modes: Vec<HumanMode>,
    /// Restricts playback to one motion type.
    pub motion: Option<MotionLabel>,
    /// Index into `scenes` of the shared workstation.
    pub scene: usize,
    pub k: usize,
    pub dropout: f64,
    pub start: [f64; 6],
    pub goal: [f64; 6],
    /// Max-norm joint motion per tick.
    pub robot_step: f64,
    /// Predicted steps between capsule sets in the collision scene.
    pub capsule_stride: usize,
    /// Ticks the robot waits before moving, plus a uniform draw in
    /// `0..=start_delay_jitter`.
    pub start_delay: usize,
    pub start_delay_jitter: usize,
    pub max_ticks: usize,
    pub planner: BidirectionalOptions,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            runs: 50,
            modes: vec![HumanMode::None, HumanMode::CurrentOnly, HumanMode::WithPrediction],
            motion: Some(MotionLabel::A),
            scene: 0,
            k: DEFAULT_MC_SAMPLES,
            dropout: DEFAULT_DROPOUT,
            start: [2.4, 0.39, -1.96, -2.07, 0.03, 0.0],
            goal: [0.0, 0.39, -1.96, -2.07, 0.03, 0.0],
            robot_step: 0.05,
            capsule_stride: 4,
            start_delay: 60,
            start_delay_jitter: 20,
            max_ticks: 400,
            planner: BidirectionalOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub version: u32,
    pub seed: u64,
    /// Resolved against the config file's directory.
    pub output_dir: PathBuf,
    pub scenes: Vec<PathBuf>,
    pub human: HumanSection,
    pub expert: ExpertConfig,
    pub expert_human: ExpertHumanSection,
    pub predictor: PredictorTrainConfig,
    pub planner: PlannerTrainConfig,
    pub benchmark: BenchmarkSection,
    pub uncertainty: UncertaintySection,
    pub simulation: SimulationSection,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: PathBuf::from("out"),
            scenes: Vec::new(),
            human: HumanSection::default(),
            expert: ExpertConfig::default(),
            expert_human: ExpertHumanSection::default(),
            predictor: PredictorTrainConfig::default(),
            planner: PlannerTrainConfig::default(),
            benchmark: BenchmarkSection::default(),
            uncertainty: UncertaintySection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

impl HarnessConfig {
    /// Reads a config and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        for s in &mut self.scenes {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        if self.scenes.is_empty() {
            return Err(Error::Config("at least one scene file is required".into()));
        }
        for s in &self.scenes {
            if !s.is_file() {
                return Err(Error::Config(format!("scene file {} does not exist", s.display())));
            }
        }
        self.predictor.validate()?;
        self.planner.validate()?;
        let u = &self.uncertainty;
        if u.ks.iter().any(|&k| k < 2) || u.windows == 0 || u.repeats == 0 {
            return Err(Error::Config("uncertainty ks must be ≥ 2 and windows, repeats positive".into()));
        }
        let sim = &self.simulation;
        if sim.modes.contains(&HumanMode::WithPrediction) && sim.k < 2 {
            return Err(Error::Config("simulation.k must be ≥ 2 with prediction enabled".into()));
        }
        if sim.scene >= self.scenes.len() {
            return Err(Error::Config(format!("simulation.scene {} out of range", sim.scene)));
        }
        if !(sim.robot_step > 0.0) || sim.capsule_stride == 0 || sim.max_ticks == 0 {
            return Err(Error::Config("simulation robot_step, capsule_stride, max_ticks must be positive".into()));
        }
        let b = &self.benchmark;
        if !(b.validation_step > 0.0) || !(0.0..=1.0).contains(&b.failure_threshold) {
            return Err(Error::Config("benchmark validation_step must be positive, failure_threshold in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Fixed artifact names under the output directory.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    pub dir: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn human_jsonl(&self) -> PathBuf {
        self.file("human_windows.jsonl")
    }
    pub fn expert_jsonl(&self) -> PathBuf {
        self.file("expert.jsonl")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.json")
    }
    pub fn predictor_weights(&self) -> PathBuf {
        self.file("predictor_weights.json")
    }
    pub fn predictor_curve(&self) -> PathBuf {
        self.file("predictor_curve.csv")
    }
    pub fn planner_weights(&self) -> PathBuf {
        self.file("planner_weights.json")
    }
    pub fn planner_curve(&self) -> PathBuf {
        self.file("planner_curve.csv")
    }
    pub fn bench_metrics(&self) -> PathBuf {
        self.file("benchmark_metrics.csv")
    }
    pub fn bench_summary(&self) -> PathBuf {
        self.file("benchmark_summary.json")
    }
    pub fn sim_metrics(&self) -> PathBuf {
        self.file("simulation_metrics.csv")
    }
    pub fn sim_timeline(&self) -> PathBuf {
        self.file("simulation_timeline.json")
    }
    pub fn sim_summary(&self) -> PathBuf {
        self.file("simulation_summary.json")
    }
    pub fn k_sweep(&self) -> PathBuf {
        self.file("k_sweep.csv")
    }
    pub fn uncertainty_summary(&self) -> PathBuf {
        self.file("uncertainty_summary.json")
    }
}
