use serde::{Deserialize, Serialize};

use super::config::{HarnessConfig, OutputPaths};
use super::{ensure_dir, Workspaces};
use crate::error::{Error, Result};
use crate::gnn_planner::{prepare_examples, train_planner};
use crate::human_synth::{read_windows_jsonl, Split};
use crate::nn::write_curve_csv;
use crate::oracle_planners::ExpertDataset;
use crate::predictor::train_predictor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainTarget {
    Predictor,
    Planner,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub target: TrainTarget,
    pub epochs: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
}

/// Trains one network from the generated datasets; `epochs` overrides the config.
pub fn cmd_train(cfg: &HarnessConfig, target: TrainTarget, epochs: Option<usize>) -> Result<TrainSummary> {
    let out = OutputPaths::new(&cfg.output_dir);
    ensure_dir(&out.dir)?;
    match target {
        TrainTarget::Predictor => {
            let path = out.human_jsonl();
            if !path.is_file() {
                return Err(Error::Dataset(format!("{} missing; run generate first", path.display())));
            }
            let records = read_windows_jsonl(&path)?;
            let pick = |split: Split| -> Vec<(Vec<f64>, Vec<f64>)> {
                records.iter().filter(|r| r.split == split).map(|r| (r.x_flat(), r.y_flat())).collect()
            };
            let (train, val) = (pick(Split::Train), pick(Split::Val));
            let mut tc = cfg.predictor.clone();
            tc.seed ^= cfg.seed;
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let rep = train_predictor(&train, &val, &tc)?;
            rep.weights.save(&out.predictor_weights())?;
            write_curve_csv(&out.predictor_curve(), &rep.curve)?;
            Ok(TrainSummary {
                target,
                epochs: tc.epochs,
                initial_val_loss: rep.initial_val_loss,
                best_val_loss: rep.best_val_loss,
                best_epoch: rep.best_epoch,
            })
        }
        TrainTarget::Planner => {
            let path = out.expert_jsonl();
            if !path.is_file() {
                return Err(Error::Dataset(format!("{} missing; run generate first", path.display())));
            }
            let ws = Workspaces::load(cfg)?;
            let data = ExpertDataset::read_jsonl(&path)?;
            let examples = prepare_examples(&data, &ws.scenes, ws.schema())?;
            let mut tc = cfg.planner.clone();
            tc.seed ^= cfg.seed;
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let rep = train_planner(&examples, &tc, ws.schema())?;
            rep.weights.save(&out.planner_weights())?;
            write_curve_csv(&out.planner_curve(), &rep.curve)?;
            Ok(TrainSummary {
                target,
                epochs: tc.epochs,
                initial_val_loss: rep.initial_val_loss,
                best_val_loss: rep.best_val_loss,
                best_epoch: rep.best_epoch,
            })
        }
    }
}
