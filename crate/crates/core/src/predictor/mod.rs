//! Bone-vector motion prediction with Monte Carlo dropout uncertainty.

mod lstm;
mod train;

pub use lstm::{gradient_check, lstm_forward, window_array, DropoutMasks, ForwardMode, LstmLayer, PredictorWeights, POSE_DIM, PREDICTOR_VERSION};
pub use train::{train_predictor, PredictorTrainConfig, PredictorTrainReport, SplitWindows, WindowSource};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm_models::{reconstruct_arm, AnthropometricParams, ArmBonePose, ArmJointPositions};
use crate::error::{Error, Result};

pub const DEFAULT_DROPOUT: f64 = 0.10;
pub const DEFAULT_MC_SAMPLES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub p: f64,
}

impl Default for DropoutSpec {
    fn default() -> Self {
        Self { p: DEFAULT_DROPOUT }
    }
}

impl DropoutSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::DomainError {
                value: self.p,
                domain: "dropout probability in [0, 1)",
            });
        }
        Ok(())
    }
}

/// `K` sampled future sequences (each `M × 6`, unit bones) with their
/// per-dimension mean and unbiased variance.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertainPrediction {
    pub samples: Vec<Array2<f64>>,
    pub mean: Array2<f64>,
    pub variance: Array2<f64>,
    pub horizon_dt: f64,
}

impl UncertainPrediction {
    /// Renormalizes every sample row to unit bones and computes the moments.
    pub fn from_samples(raw: Vec<Array2<f64>>, horizon_dt: f64) -> Result<Self> {
        let mut samples = raw;
        for s in &mut samples {
            if s.ncols() != POSE_DIM {
                return Err(Error::ShapeMismatch(format!("sample has {} columns, expected 6", s.ncols())));
            }
            for mut row in s.rows_mut() {
                let pose = ArmBonePose::from_slice(row.as_slice().expect("standard layout")).renormalized()?;
                row.assign(&ndarray::ArrayView1::from(&pose.to_array()));
            }
        }
        let (mean, variance) = predictive_moments(&samples)?;
        Ok(Self {
            samples,
            mean,
            variance,
            horizon_dt,
        })
    }

    /// `k` identical copies of a static pose: the prediction used when only
    /// the current observation is trusted. Variance is exactly zero.
    pub fn constant(pose: &ArmBonePose, k: usize, steps: usize, horizon_dt: f64) -> Result<Self> {
        let pose = pose.renormalized()?;
        let row = pose.to_array();
        let one = Array2::from_shape_fn((steps, POSE_DIM), |(_, j)| row[j]);
        Self::from_samples(vec![one; k], horizon_dt)
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn steps(&self) -> usize {
        self.mean.nrows()
    }

    pub fn sample_pose(&self, k: usize, step: usize) -> ArmBonePose {
        ArmBonePose::from_slice(self.samples[k].row(step).as_slice().expect("standard layout"))
    }

    pub fn mean_pose(&self, step: usize) -> Result<ArmBonePose> {
        ArmBonePose::from_slice(self.mean.row(step).as_slice().expect("standard layout")).renormalized()
    }

    /// Positional spread implied by the variance at one step: elbow
    /// `L1·sqrt(Σu_φ1)`, wrist `sqrt(L1²Σu_φ1 + L2²Σu_φ2)`.
    pub fn joint_sigma(&self, step: usize, p_h: &AnthropometricParams) -> [f64; 2] {
        let u = self.variance.row(step);
        let s1: f64 = u.iter().take(3).sum();
        let s2: f64 = u.iter().skip(3).sum();
        let l1 = p_h.upper_arm_length;
        let l2 = p_h.forearm_length;
        [l1 * s1.sqrt(), (l1 * l1 * s1 + l2 * l2 * s2).sqrt()]
    }
}

/// Per-dimension mean and unbiased variance over `K ≥ 2` samples.
///
/// Sums are taken on offsets from the first sample so that identical
/// samples give exactly zero and cancellation stays small; algebraically
/// this is `(ΣF⊙F − K·E⊙E)/(K−1)`.
pub fn predictive_moments(samples: &[Array2<f64>]) -> Result<(Array2<f64>, Array2<f64>)> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InsufficientSamples(k));
    }
    let dim = samples[0].dim();
    if samples.iter().any(|s| s.dim() != dim) {
        return Err(Error::ShapeMismatch("samples differ in shape".into()));
    }
    let base = &samples[0];
    let mut sum = Array2::<f64>::zeros(dim);
    let mut sum_sq = Array2::<f64>::zeros(dim);
    for s in &samples[1..] {
        let d = s - base;
        sum_sq += &(&d * &d);
        sum += &d;
    }
    let kf = k as f64;
    let mean_d = sum / kf;
    let mean = base + &mean_d;
    let mut var = (sum_sq - &(&mean_d * &mean_d) * kf) / (kf - 1.0);
    var.mapv_inplace(|v| v.max(0.0));
    Ok((mean, var))
}

/// `K` stochastic forward passes with fresh Bernoulli masks. Passes run
/// one after another so cost grows linearly in `K`.
pub fn mc_dropout_sample(
    x: &Array2<f64>,
    w: &PredictorWeights,
    k: usize,
    dropout: DropoutSpec,
    seed: u64,
    horizon: usize,
) -> Result<Vec<Array2<f64>>> {
    if k < 2 {
        return Err(Error::InsufficientSamples(k));
    }
    dropout.validate()?;
    let hidden = w.hidden_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let masks = DropoutMasks::sample(&hidden, 1, dropout.p, &mut rng);
            lstm_forward(x, w, ForwardMode::MonteCarlo(&masks), horizon)
        })
        .collect()
}

/// MC sampling followed by renormalization and moments.
pub fn predict_uncertain(
    x: &Array2<f64>,
    w: &PredictorWeights,
    k: usize,
    dropout: DropoutSpec,
    seed: u64,
    horizon: usize,
    horizon_dt: f64,
) -> Result<UncertainPrediction> {
    UncertainPrediction::from_samples(mc_dropout_sample(x, w, k, dropout, seed, horizon)?, horizon_dt)
}

/// Reconstructed joints for every sample at the requested steps: `[h][k]`.
pub fn prediction_to_poses(
    pred: &UncertainPrediction,
    p_h: &AnthropometricParams,
    horizons: &[usize],
) -> Result<Vec<Vec<ArmJointPositions>>> {
    horizons
        .iter()
        .map(|&h| {
            if h >= pred.steps() {
                return Err(Error::ShapeMismatch(format!("horizon {h} outside 0..{}", pred.steps())));
            }
            (0..pred.k())
                .map(|k| reconstruct_arm(&pred.sample_pose(k, h).renormalized()?, p_h))
                .collect()
        })
        .collect()
}

/// Mean over steps of the sample standard deviation of the reconstructed
/// elbow and wrist positions around their mean position.
pub fn joint_deviations(pred: &UncertainPrediction, p_h: &AnthropometricParams) -> Result<[f64; 2]> {
    let steps: Vec<usize> = (0..pred.steps()).collect();
    let poses = prediction_to_poses(pred, p_h, &steps)?;
    let k = pred.k() as f64;
    let mut acc = [0.0; 2];
    for per_step in &poses {
        for (j, acc_j) in acc.iter_mut().enumerate() {
            let pick = |p: &ArmJointPositions| if j == 0 { p.elbow } else { p.wrist };
            let mean = per_step.iter().map(pick).sum::<crate::Vec3>() / k;
            let ss: f64 = per_step.iter().map(|p| (pick(p) - mean).norm_squared()).sum();
            *acc_j += (ss / (k - 1.0)).sqrt();
        }
    }
    Ok(acc.map(|a| a / poses.len() as f64))
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use rand::Rng;

    #[test]
    fn two_scalar_samples() {
        let a = Array2::from_elem((1, 1), 0.0);
        let b = Array2::from_elem((1, 1), 2.0);
        let (e, u) = predictive_moments(&[a, b]).unwrap();
        assert_eq!(e[[0, 0]], 1.0);
        assert_eq!(u[[0, 0]], 2.0);
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = Array2::from_shape_fn((7, 6), |_| rng.random_range(-3.0..3.0));
        let (e, u) = predictive_moments(&vec![s.clone(); 5]).unwrap();
        assert_eq!(e, s);
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn moments_need_two_samples() {
        let s = Array2::zeros((3, 6));
        assert!(matches!(predictive_moments(&[s]), Err(Error::InsufficientSamples(1))));
    }

    #[test]
    fn moments_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let k = rng.random_range(2..8);
            let samples: Vec<Array2<f64>> = (0..k)
                .map(|_| Array2::from_shape_fn((3, 6), |_| rng.random_range(-2.0..2.0)))
                .collect();
            let (e, u) = predictive_moments(&samples).unwrap();
            for r in 0..3 {
                for c in 0..6 {
                    let vals: Vec<f64> = samples.iter().map(|s| s[[r, c]]).collect();
                    let m = vals.iter().sum::<f64>() / k as f64;
                    let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k as f64 - 1.0);
                    assert!((e[[r, c]] - m).abs() < 1e-12);
                    assert!((u[[r, c]] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_dropout_samples_equal_deterministic_pass() {
        let w = PredictorWeights::init(&[8, 8, 8], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((20, 6), |_| rng.random_range(-1.0..1.0));
        let det = lstm_forward(&x, &w, ForwardMode::Deterministic, 10).unwrap();
        let samples = mc_dropout_sample(&x, &w, 4, DropoutSpec { p: 0.0 }, 7, 10).unwrap();
        for s in &samples {
            assert_eq!(s, &det);
        }
    }

    #[test]
    fn mc_sampling_is_seeded() {
        let w = PredictorWeights::init(&[8, 8, 8], 1);
        let x = Array2::from_elem((10, 6), 0.3);
        let a = mc_dropout_sample(&x, &w, 5, DropoutSpec::default(), 11, 10).unwrap();
        let b = mc_dropout_sample(&x, &w, 5, DropoutSpec::default(), 11, 10).unwrap();
        assert_eq!(a, b);
        let distinct = (0..5).any(|i| (0..5).any(|j| i != j && a[i] != a[j]));
        assert!(distinct);
    }

    #[test]
    fn poses_keep_bone_lengths() {
        let w = PredictorWeights::init(&[8, 8, 8], 2);
        let x = Array2::from_shape_fn((10, 6), |(_, j)| if j == 2 || j == 5 { -1.0 } else { 0.0 });
        let pred = predict_uncertain(&x, &w, 5, DropoutSpec::default(), 1, 50, 0.04).unwrap();
        let p_h = AnthropometricParams::default();
        let poses = prediction_to_poses(&pred, &p_h, &[0, 16, 33, 49]).unwrap();
        assert_eq!(poses.len(), 4);
        for per in &poses {
            assert_eq!(per.len(), 5);
            for p in per {
                assert!(((p.elbow - p.shoulder).norm() - p_h.upper_arm_length).abs() < 1e-9);
                assert!(((p.wrist - p.elbow).norm() - p_h.forearm_length).abs() < 1e-9);
            }
        }
        assert!(prediction_to_poses(&pred, &p_h, &[50]).is_err());
    }

    #[test]
    fn constant_prediction_has_no_spread() {
        let pose = ArmBonePose {
            phi1: Vec3::new(0.0, 0.0, -1.0),
            phi2: Vec3::new(1.0, 0.0, 0.0),
        };
        let pred = UncertainPrediction::constant(&pose, 5, 50, 0.04).unwrap();
        assert!(pred.variance.iter().all(|v| *v == 0.0));
        let dev = joint_deviations(&pred, &AnthropometricParams::default()).unwrap();
        assert_eq!(dev, [0.0, 0.0]);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
