use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{backward, batch_by_step, forward_batch, DropoutMasks, ForwardMode, PredictorWeights, POSE_DIM};
use crate::error::{Error, Result};
use crate::human_synth::{HumanDataset, Split, WindowRef};
use crate::nn::{Adam, AdamConfig, EpochStats, Parameters};

/// Anything that can hand out `(observed, future)` windows, each `len × 6`
/// row-major.
pub trait WindowSource {
    fn len(&self) -> usize;
    fn window(&self, i: usize) -> (Vec<f64>, Vec<f64>);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl WindowSource for Vec<(Vec<f64>, Vec<f64>)> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn window(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        self[i].clone()
    }
}

/// One split of a synthesized dataset.
pub struct SplitWindows<'a> {
    pub dataset: &'a HumanDataset,
    pub windows: &'a [WindowRef],
}

impl<'a> SplitWindows<'a> {
    pub fn new(dataset: &'a HumanDataset, split: Split) -> Self {
        Self {
            dataset,
            windows: dataset.windows(split),
        }
    }
}

impl WindowSource for SplitWindows<'_> {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn window(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        self.dataset.window_xy(&self.windows[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorTrainConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Windows drawn (without replacement) per epoch; 0 uses all.
    pub windows_per_epoch: usize,
    /// Evenly spaced validation windows; 0 uses all.
    pub val_windows: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for PredictorTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            dropout: super::DEFAULT_DROPOUT,
            lr: 2e-3,
            batch_size: 32,
            epochs: 30,
            windows_per_epoch: 2048,
            val_windows: 512,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl PredictorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("predictor hidden sizes must be non-empty and positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 || !(self.clip_norm > 0.0) {
            return Err(Error::Config("predictor lr, batch_size and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PredictorTrainReport {
    pub weights: PredictorWeights,
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
}

struct Batch {
    inputs: Vec<Array2<f64>>,
    targets: Vec<Array2<f64>>,
}

fn make_batch(src: &dyn WindowSource, idx: &[usize]) -> Result<Batch> {
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = idx.iter().map(|&i| src.window(i)).collect();
    let (nx, ny) = (pairs[0].0.len(), pairs[0].1.len());
    if nx == 0 || ny == 0 || nx % POSE_DIM != 0 || ny % POSE_DIM != 0 {
        return Err(Error::ShapeMismatch(format!("window sizes {nx}/{ny} are not multiples of 6")));
    }
    if pairs.iter().any(|(x, y)| x.len() != nx || y.len() != ny) {
        return Err(Error::ShapeMismatch("windows differ in length".into()));
    }
    let xs: Vec<&[f64]> = pairs.iter().map(|p| p.0.as_slice()).collect();
    let ys: Vec<&[f64]> = pairs.iter().map(|p| p.1.as_slice()).collect();
    Ok(Batch {
        inputs: batch_by_step(&xs),
        targets: batch_by_step(&ys),
    })
}

fn mse(outputs: &[Array2<f64>], targets: &[Array2<f64>]) -> f64 {
    let n: usize = targets.iter().map(|t| t.len()).sum();
    let s: f64 = outputs.iter().zip(targets).map(|(o, t)| (o - t).mapv(|v| v * v).sum()).sum();
    s / n as f64
}

/// Deterministic-mode MSE over the given windows.
pub(crate) fn evaluate(w: &PredictorWeights, src: &dyn WindowSource, idx: &[usize], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch_size) {
        let b = make_batch(src, chunk)?;
        let (out, _) = forward_batch(w, &b.inputs, ForwardMode::Deterministic, b.targets.len(), false);
        let n: usize = b.targets.iter().map(|t| t.len()).sum();
        total += mse(&out, &b.targets) * n as f64;
        count += n;
    }
    Ok(total / count as f64)
}

/// Mini-batch Adam on MSE with dropout active; keeps the weights with the
/// lowest validation loss.
pub fn train_predictor(
    train: &dyn WindowSource,
    val: &dyn WindowSource,
    cfg: &PredictorTrainConfig,
) -> Result<PredictorTrainReport> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Dataset("predictor training needs non-empty train and val splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = PredictorWeights::init(&cfg.hidden, cfg.seed ^ 0xA5A5_0F0F);
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        &w,
    );

    let val_idx: Vec<usize> = if cfg.val_windows == 0 || cfg.val_windows >= val.len() {
        (0..val.len()).collect()
    } else {
        (0..cfg.val_windows).map(|i| i * val.len() / cfg.val_windows).collect()
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let per_epoch = if cfg.windows_per_epoch == 0 {
        train.len()
    } else {
        cfg.windows_per_epoch.min(train.len())
    };

    let initial_val_loss = evaluate(&w, val, &val_idx, cfg.batch_size.max(64))?;
    let mut best = (w.clone(), initial_val_loss, 0usize);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order[..per_epoch].chunks(cfg.batch_size) {
            let b = make_batch(train, chunk)?;
            let masks = DropoutMasks::sample(&cfg.hidden, chunk.len(), cfg.dropout, &mut rng);
            let mode = ForwardMode::Train(&masks);
            let (out, cache) = forward_batch(&w, &b.inputs, mode, b.targets.len(), true);
            let loss = mse(&out, &b.targets);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let n: f64 = b.targets.iter().map(|t| t.len()).sum::<usize>() as f64;
            let d_out: Vec<Array2<f64>> = out.iter().zip(&b.targets).map(|(o, t)| (o - t) * (2.0 / n)).collect();
            let mut grads = backward(&w, cache.as_ref().expect("cache requested"), mode, &d_out);
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(Error::Divergence { epoch, loss: norm });
            }
            if norm > cfg.clip_norm {
                grads.scale(cfg.clip_norm / norm);
            }
            opt.update(&mut w, &grads);
            loss_sum += loss;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;
        let val_loss = evaluate(&w, val, &val_idx, cfg.batch_size.max(64))?;
        if !val_loss.is_finite() || !w.all_finite() {
            return Err(Error::Divergence { epoch, loss: val_loss });
        }
        log::debug!("predictor epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 {
            best = (w.clone(), val_loss, epoch);
        }
    }
    Ok(PredictorTrainReport {
        weights: best.0,
        curve,
        best_epoch: best.2,
        initial_val_loss,
        best_val_loss: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_sample() -> Vec<(Vec<f64>, Vec<f64>)> {
        let x: Vec<f64> = (0..8 * 6).map(|i| ((i as f64) * 0.37).sin()).collect();
        let y: Vec<f64> = (0..4 * 6).map(|i| ((i as f64) * 0.21).cos() * 0.5).collect();
        vec![(x, y)]
    }

    #[test]
    fn overfits_a_single_window() {
        let data = one_sample();
        let cfg = PredictorTrainConfig {
            hidden: vec![16, 16, 16],
            dropout: 0.0,
            lr: 1e-2,
            batch_size: 1,
            epochs: 600,
            windows_per_epoch: 0,
            val_windows: 0,
            clip_norm: 5.0,
            seed: 1,
        };
        let rep = train_predictor(&data, &data, &cfg).unwrap();
        assert!(rep.best_val_loss < 1e-3, "best loss {}", rep.best_val_loss);
    }

    #[test]
    fn same_seed_same_weights() {
        let data = one_sample();
        let cfg = PredictorTrainConfig {
            hidden: vec![4, 4, 4],
            epochs: 5,
            batch_size: 1,
            seed: 3,
            ..Default::default()
        };
        let a = train_predictor(&data, &data, &cfg).unwrap();
        let b = train_predictor(&data, &data, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn empty_split_is_rejected() {
        let data = one_sample();
        let empty: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let cfg = PredictorTrainConfig::default();
        assert!(train_predictor(&empty, &data, &cfg).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let data = vec![(vec![f64::NAN; 12], vec![0.0; 12])];
        let cfg = PredictorTrainConfig {
            hidden: vec![2],
            epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train_predictor(&data, &data, &cfg),
            Err(Error::Divergence { .. })
        ));
    }
}
