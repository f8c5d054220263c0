//! Synthetic 25 Hz human-arm reaching trajectories and windowed bone-vector datasets.
//!
//! Each trajectory moves the wrist through jittered waypoints using
//! minimum-jerk point-to-point segments separated by dwell periods. The
//! elbow is placed on the two-link swivel circle at a fixed angle from the
//! downward vertical, and every frame is rebuilt through
//! [`reconstruct_arm`] so bone lengths are exact.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arm_models::{normalize_bone_vectors, reconstruct_arm, AnthropometricParams, ArmBonePose, ArmJointPositions};
use crate::error::{Error, Result};
use crate::Vec3;

pub const CAPTURE_RATE_HZ: f64 = 25.0;
pub const OBSERVATION_STEPS: usize = 50;
pub const PREDICTION_STEPS: usize = 50;

/// s(τ) = 10τ³ − 15τ⁴ + 6τ⁵.
pub fn min_jerk_profile(tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::DomainError {
            value: tau,
            domain: "[0, 1]",
        });
    }
    let t3 = tau * tau * tau;
    Ok(t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionLabel {
    /// table → tool box → table
    A,
    /// table → desktop → table
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    /// Time spent at the waypoint before leaving it, s.
    pub dwell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub label: MotionLabel,
    pub waypoints: Vec<Waypoint>,
    /// Nominal mean wrist speed during a reach, m/s.
    #[serde(default = "default_mean_speed")]
    pub mean_speed: f64,
}

fn default_mean_speed() -> f64 {
    0.12
}

impl MotionScript {
    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::Config("a motion script needs at least 2 waypoints".into()));
        }
        if self.waypoints.iter().any(|w| !(w.dwell >= 0.0)) {
            return Err(Error::Config("waypoint dwell times must be non-negative".into()));
        }
        if !(self.mean_speed > 0.0) {
            return Err(Error::Config("mean_speed must be positive".into()));
        }
        Ok(())
    }

    /// Motion A on the default workstation: table (a) → tool box (b) → table.
    pub fn default_a() -> Self {
        Self {
            label: MotionLabel::A,
            waypoints: vec![
                Waypoint {
                    position: Vec3::new(0.42, 0.36, 0.13),
                    dwell: 1.2,
                },
                Waypoint {
                    position: Vec3::new(0.14, 0.40, 0.20),
                    dwell: 0.8,
                },
                Waypoint {
                    position: Vec3::new(0.42, 0.36, 0.13),
                    dwell: 0.8,
                },
            ],
            mean_speed: default_mean_speed(),
        }
    }

    /// Motion B on the default workstation: table (a) → desktop (c) → table.
    pub fn default_b() -> Self {
        Self {
            label: MotionLabel::B,
            waypoints: vec![
                Waypoint {
                    position: Vec3::new(0.42, 0.36, 0.13),
                    dwell: 1.2,
                },
                Waypoint {
                    position: Vec3::new(0.70, 0.38, 0.30),
                    dwell: 0.8,
                },
                Waypoint {
                    position: Vec3::new(0.42, 0.36, 0.13),
                    dwell: 0.8,
                },
            ],
            mean_speed: default_mean_speed(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthNoise {
    pub waypoint_sigma: f64,
    pub speed_scale_range: [f64; 2],
    /// Elbow swivel angle from the downward vertical plane, rad.
    pub swivel_angle: f64,
    pub swivel_sigma: f64,
}

impl Default for SynthNoise {
    fn default() -> Self {
        Self {
            waypoint_sigma: 0.02,
            speed_scale_range: [0.8, 1.2],
            swivel_angle: 30f64.to_radians(),
            swivel_sigma: 3f64.to_radians(),
        }
    }
}

impl SynthNoise {
    pub fn zero() -> Self {
        Self {
            waypoint_sigma: 0.0,
            speed_scale_range: [1.0, 1.0],
            swivel_sigma: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmTrajectory {
    pub rate: f64,
    pub frames: Vec<ArmJointPositions>,
    pub bone_frames: Vec<ArmBonePose>,
}

impl ArmTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.frames.len().saturating_sub(1)) as f64 / self.rate
    }

    /// Bone vectors of frames `start..start + len` flattened row-major (len × 6).
    pub fn bone_window(&self, start: usize, len: usize) -> Vec<f64> {
        self.bone_frames[start..start + len]
            .iter()
            .flat_map(|b| b.to_array())
            .collect()
    }
}

/// Elbow on the two-link swivel circle, `swivel` rad from the lowest point.
fn elbow_position(shoulder: &Vec3, wrist: &Vec3, l1: f64, l2: f64, swivel: f64) -> Vec3 {
    let sw = wrist - shoulder;
    let d = sw.norm().clamp((l1 - l2).abs() + 1e-6, l1 + l2 - 1e-6);
    let n = if sw.norm() > 1e-12 { sw / sw.norm() } else { Vec3::new(1.0, 0.0, 0.0) };
    let along = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
    let rho = (l1 * l1 - along * along).max(0.0).sqrt();
    let down = Vec3::new(0.0, 0.0, -1.0);
    let mut u = down - n * down.dot(&n);
    if u.norm() < 1e-9 {
        u = Vec3::new(1.0, 0.0, 0.0) - n * n.x;
    }
    let u = u.normalize();
    let v = n.cross(&u);
    shoulder + n * along + (u * swivel.cos() + v * swivel.sin()) * rho
}

/// Generates one trajectory. Deterministic in `seed`.
pub fn synth_trajectory(
    script: &MotionScript,
    p_h: &AnthropometricParams,
    noise: &SynthNoise,
    seed: u64,
) -> Result<ArmTrajectory> {
    script.validate()?;
    let [lo, hi] = noise.speed_scale_range;
    if !(0.5 <= lo && lo <= hi && hi <= 2.0) {
        return Err(Error::Config(format!("speed_scale_range [{lo}, {hi}] must lie within [0.5, 2.0]")));
    }
    let reach = p_h.reach();
    let shoulder = p_h.shoulder_anchor;
    for (index, w) in script.waypoints.iter().enumerate() {
        let distance = (w.position - shoulder).norm();
        if distance > reach {
            return Err(Error::UnreachableWaypoint { index, distance, reach });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed_scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let swivel = noise.swivel_angle
        + if noise.swivel_sigma > 0.0 {
            Normal::new(0.0, noise.swivel_sigma).unwrap().sample(&mut rng)
        } else {
            0.0
        };
    let jitter = (noise.waypoint_sigma > 0.0).then(|| Normal::new(0.0, noise.waypoint_sigma).unwrap());
    let max_reach = 0.97 * reach;
    let targets: Vec<Vec3> = script
        .waypoints
        .iter()
        .map(|w| {
            let mut p = w.position;
            if let Some(j) = &jitter {
                p += Vec3::new(j.sample(&mut rng), j.sample(&mut rng), j.sample(&mut rng));
            }
            let off = p - shoulder;
            if off.norm() > max_reach {
                p = shoulder + off * (max_reach / off.norm());
            }
            p
        })
        .collect();

    // Piecewise timeline of (dwell, move) phases, quantized to whole frames.
    let rate = CAPTURE_RATE_HZ;
    let quant = |t: f64| (t * rate).round().max(0.0) as usize;
    enum Phase {
        Hold(Vec3, usize),
        Move(Vec3, Vec3, usize),
    }
    let mut phases = Vec::new();
    for (i, w) in script.waypoints.iter().enumerate() {
        phases.push(Phase::Hold(targets[i], quant(w.dwell)));
        if i + 1 < targets.len() {
            let dist = (targets[i + 1] - targets[i]).norm();
            let dur = dist / (script.mean_speed * speed_scale);
            let frames = ((dur * rate).ceil() as usize).max(1);
            phases.push(Phase::Move(targets[i], targets[i + 1], frames));
        }
    }

    let mut wrists = vec![targets[0]];
    for phase in &phases {
        match *phase {
            Phase::Hold(p, n) => wrists.extend(std::iter::repeat_n(p, n)),
            Phase::Move(a, b, n) => {
                for k in 1..=n {
                    let s = min_jerk_profile(k as f64 / n as f64)?;
                    wrists.push(a + (b - a) * s);
                }
            }
        }
    }

    let l1 = p_h.upper_arm_length;
    let l2 = p_h.forearm_length;
    let mut frames = Vec::with_capacity(wrists.len());
    let mut bone_frames = Vec::with_capacity(wrists.len());
    for w in &wrists {
        let elbow = elbow_position(&shoulder, w, l1, l2, swivel);
        let raw = ArmJointPositions {
            shoulder,
            elbow,
            wrist: *w,
        };
        let bones = normalize_bone_vectors(&raw)?;
        frames.push(reconstruct_arm(&bones, p_h)?);
        bone_frames.push(bones);
    }
    Ok(ArmTrajectory {
        rate,
        frames,
        bone_frames,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// A window reference: observed frames `t0..t0+50`, future frames `t0+50..t0+100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRef {
    pub traj_id: usize,
    pub t0: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub count_per_script: usize,
    pub split: [f64; 3],
    pub noise: SynthNoise,
    pub window_stride: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            count_per_script: 120,
            split: [0.70, 0.15, 0.15],
            noise: SynthNoise::default(),
            window_stride: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HumanDataset {
    pub trajectories: Vec<ArmTrajectory>,
    pub labels: Vec<MotionLabel>,
    pub traj_split: Vec<Split>,
    pub train: Vec<WindowRef>,
    pub val: Vec<WindowRef>,
    pub test: Vec<WindowRef>,
}

/// Per-trajectory seed derived from the dataset seed.
pub fn trajectory_seed(seed: u64, script_index: usize, traj_index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ ((script_index as u64) << 40)
        ^ (traj_index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Splits `n` items into train/val/test counts using floor rounding, with
/// the remainder going to train.
pub fn split_counts(n: usize, split: [f64; 3]) -> [usize; 3] {
    let val = (split[1] * n as f64 + 1e-9).floor() as usize;
    let test = (split[2] * n as f64 + 1e-9).floor() as usize;
    [n - val - test, val, test]
}

pub fn build_dataset(
    scripts: &[MotionScript],
    p_h: &AnthropometricParams,
    dataset_cfg: &DatasetSpec,
    seed: u64,
) -> Result<HumanDataset> {
    let total: f64 = dataset_cfg.split.iter().sum();
    if (total - 1.0).abs() > 1e-9 || dataset_cfg.split.iter().any(|s| *s < 0.0) {
        return Err(Error::Config(format!("split {:?} must be non-negative and sum to 1", dataset_cfg.split)));
    }
    if dataset_cfg.window_stride == 0 {
        return Err(Error::Config("window_stride must be positive".into()));
    }
    let need = OBSERVATION_STEPS + PREDICTION_STEPS;
    let mut ds = HumanDataset {
        trajectories: Vec::new(),
        labels: Vec::new(),
        traj_split: Vec::new(),
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    let mut split_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5B17);
    for (si, script) in scripts.iter().enumerate() {
        let mut ids = Vec::with_capacity(dataset_cfg.count_per_script);
        for ti in 0..dataset_cfg.count_per_script {
            let traj = synth_trajectory(script, p_h, &dataset_cfg.noise, trajectory_seed(seed, si, ti))?;
            let traj_id = ds.trajectories.len();
            if traj.len() < need {
                return Err(Error::InsufficientLength {
                    traj_id,
                    frames: traj.len(),
                    required: need,
                });
            }
            ds.trajectories.push(traj);
            ds.labels.push(script.label);
            ds.traj_split.push(Split::Train);
            ids.push(traj_id);
        }
        // Fisher-Yates on trajectory ids, then contiguous split.
        for i in (1..ids.len()).rev() {
            let j = split_rng.random_range(0..=i);
            ids.swap(i, j);
        }
        let [n_train, n_val, _] = split_counts(ids.len(), dataset_cfg.split);
        for (k, &id) in ids.iter().enumerate() {
            ds.traj_split[id] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    for (traj_id, traj) in ds.trajectories.iter().enumerate() {
        let windows = (0..=traj.len() - need)
            .step_by(dataset_cfg.window_stride)
            .map(|t0| WindowRef { traj_id, t0 });
        match ds.traj_split[traj_id] {
            Split::Train => ds.train.extend(windows),
            Split::Val => ds.val.extend(windows),
            Split::Test => ds.test.extend(windows),
        }
    }
    Ok(ds)
}

impl HumanDataset {
    pub fn windows(&self, split: Split) -> &[WindowRef] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Observed (50×6) and future (50×6) bone vectors of a window, row-major.
    pub fn window_xy(&self, w: &WindowRef) -> (Vec<f64>, Vec<f64>) {
        let traj = &self.trajectories[w.traj_id];
        (
            traj.bone_window(w.t0, OBSERVATION_STEPS),
            traj.bone_window(w.t0 + OBSERVATION_STEPS, PREDICTION_STEPS),
        )
    }

    pub fn trajectory_ids(&self, split: Split) -> Vec<usize> {
        (0..self.trajectories.len()).filter(|&i| self.traj_split[i] == split).collect()
    }

    /// Writes one JSON record per window: `{split, traj_id, t0, X, Y}`.
    pub fn write_jsonl(&self, path: &Path) -> Result<usize> {
        #[derive(Serialize)]
        struct Record<'a> {
            split: Split,
            traj_id: usize,
            t0: usize,
            #[serde(rename = "X")]
            x: Vec<&'a [f64]>,
            #[serde(rename = "Y")]
            y: Vec<&'a [f64]>,
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut n = 0;
        for split in [Split::Train, Split::Val, Split::Test] {
            for w in self.windows(split) {
                let (x, y) = self.window_xy(w);
                let rec = Record {
                    split,
                    traj_id: w.traj_id,
                    t0: w.t0,
                    x: x.chunks(6).collect(),
                    y: y.chunks(6).collect(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
                n += 1;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(n)
    }
}

/// A window loaded back from a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub split: Split,
    pub traj_id: usize,
    pub t0: usize,
    #[serde(rename = "X")]
    pub x: Vec<[f64; 6]>,
    #[serde(rename = "Y")]
    pub y: Vec<[f64; 6]>,
}

impl WindowRecord {
    pub fn x_flat(&self) -> Vec<f64> {
        self.x.iter().flatten().copied().collect()
    }

    pub fn y_flat(&self) -> Vec<f64> {
        self.y.iter().flatten().copied().collect()
    }
}

pub fn read_windows_jsonl(path: &Path) -> Result<Vec<WindowRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_boundaries_and_symmetry() {
        assert_eq!(min_jerk_profile(0.0).unwrap(), 0.0);
        assert_eq!(min_jerk_profile(1.0).unwrap(), 1.0);
        assert!((min_jerk_profile(0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(min_jerk_profile(1.1), Err(Error::DomainError { .. })));
        assert!(matches!(min_jerk_profile(-0.1), Err(Error::DomainError { .. })));
    }

    #[test]
    fn min_jerk_has_zero_end_velocity() {
        let h = 1e-6;
        let s0 = (min_jerk_profile(h).unwrap() - min_jerk_profile(0.0).unwrap()) / h;
        let s1 = (min_jerk_profile(1.0).unwrap() - min_jerk_profile(1.0 - h).unwrap()) / h;
        assert!(s0.abs() < 1e-6);
        assert!(s1.abs() < 1e-6);
        // peak velocity of the quintic is 15/8 at the midpoint
        let mid = (min_jerk_profile(0.5 + h).unwrap() - min_jerk_profile(0.5 - h).unwrap()) / (2.0 * h);
        assert!((mid - 1.875).abs() < 1e-6);
    }

    fn two_point_script() -> MotionScript {
        MotionScript {
            label: MotionLabel::A,
            waypoints: vec![
                Waypoint {
                    position: Vec3::new(0.40, 0.35, 0.15),
                    dwell: 0.0,
                },
                Waypoint {
                    position: Vec3::new(0.20, 0.40, 0.20),
                    dwell: 0.0,
                },
            ],
            mean_speed: 0.12,
        }
    }

    #[test]
    fn zero_noise_hits_endpoints() {
        let p_h = AnthropometricParams::default();
        let script = two_point_script();
        let traj = synth_trajectory(&script, &p_h, &SynthNoise::zero(), 1).unwrap();
        let first = traj.frames.first().unwrap().wrist;
        let last = traj.frames.last().unwrap().wrist;
        assert!((first - script.waypoints[0].position).norm() < 1e-9);
        assert!((last - script.waypoints[1].position).norm() < 1e-9);
    }

    #[test]
    fn unreachable_waypoint_is_rejected() {
        let p_h = AnthropometricParams::default();
        let mut script = two_point_script();
        script.waypoints[1].position = p_h.shoulder_anchor + Vec3::new(1.2, 0.0, 0.0);
        assert!(matches!(
            synth_trajectory(&script, &p_h, &SynthNoise::default(), 1),
            Err(Error::UnreachableWaypoint { index: 1, .. })
        ));
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let p_h = AnthropometricParams::default();
        let script = MotionScript::default_a();
        let noise = SynthNoise::default();
        let a = synth_trajectory(&script, &p_h, &noise, 42).unwrap();
        let b = synth_trajectory(&script, &p_h, &noise, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_trajectory(&script, &p_h, &noise, 43).unwrap();
        let n = a.len().min(c.len());
        let dev = (0..n)
            .map(|i| (a.frames[i].wrist - c.frames[i].wrist).norm())
            .fold(0.0, f64::max);
        assert!(dev > 0.0);
    }

    #[test]
    fn frames_respect_bone_lengths_and_speed_bound() {
        let p_h = AnthropometricParams::default();
        for (k, script) in [MotionScript::default_a(), MotionScript::default_b()].iter().enumerate() {
            for seed in 0..10 {
                let traj = synth_trajectory(script, &p_h, &SynthNoise::default(), seed * 7 + k as u64).unwrap();
                assert_eq!(traj.frames.len(), traj.bone_frames.len());
                let bound = p_h.reach() / (2.0 * traj.rate);
                for w in traj.frames.windows(2) {
                    assert!((w[1].wrist - w[0].wrist).norm() <= bound);
                }
                for f in &traj.frames {
                    assert!(((f.elbow - f.shoulder).norm() - p_h.upper_arm_length).abs() < 1e-9);
                    assert!(((f.wrist - f.elbow).norm() - p_h.forearm_length).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dataset_split_and_window_shapes() {
        let p_h = AnthropometricParams::default();
        let dataset_cfg = DatasetSpec {
            window_stride: 7,
            ..DatasetSpec::default()
        };
        let scripts = [MotionScript::default_a(), MotionScript::default_b()];
        let ds = build_dataset(&scripts, &p_h, &dataset_cfg, 3).unwrap();
        assert_eq!(ds.trajectories.len(), 240);
        for label in [MotionLabel::A, MotionLabel::B] {
            let mut counts = [0; 3];
            for (i, l) in ds.labels.iter().enumerate() {
                if *l == label {
                    counts[ds.traj_split[i] as usize] += 1;
                }
            }
            assert_eq!(counts, [84, 18, 18]);
        }
        for split in [Split::Train, Split::Val, Split::Test] {
            for w in ds.windows(split).iter().take(50) {
                assert_eq!(ds.traj_split[w.traj_id], split);
                let (x, y) = ds.window_xy(w);
                assert_eq!(x.len(), 50 * 6);
                assert_eq!(y.len(), 50 * 6);
            }
        }
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let p_h = AnthropometricParams::default();
        let script = two_point_script();
        let dataset_cfg = DatasetSpec {
            count_per_script: 3,
            ..DatasetSpec::default()
        };
        assert!(matches!(
            build_dataset(&[script], &p_h, &dataset_cfg, 1),
            Err(Error::InsufficientLength { .. })
        ));
    }

    #[test]
    fn split_counts_follow_fractions() {
        assert_eq!(split_counts(120, [0.70, 0.15, 0.15]), [84, 18, 18]);
        assert_eq!(split_counts(10, [0.70, 0.15, 0.15]), [8, 1, 1]);
    }
}
