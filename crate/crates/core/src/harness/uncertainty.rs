use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{HarnessConfig, OutputPaths};
use super::{ensure_dir, write_json, Workspaces};
use crate::error::{Error, Result};
use crate::human_synth::{read_windows_jsonl, Split, CAPTURE_RATE_HZ};
use crate::predictor::{joint_deviations, pearson, predict_uncertain, window_array, DropoutSpec, PredictorWeights};

/// One row of the MC sample-count sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub elbow_m: f64,
    pub wrist_m: f64,
    pub inference_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub rows: Vec<KSweepRow>,
    /// Pearson correlation of per-step prediction error with √u.
    pub pearson: f64,
    pub correlation_k: usize,
    pub points: usize,
    pub windows: usize,
}

pub fn cmd_uncertainty_report(cfg: &HarnessConfig) -> Result<UncertaintySummary> {
    let ws = Workspaces::load(cfg)?;
    let out = OutputPaths::new(&cfg.output_dir);
    ensure_dir(&out.dir)?;
    let wpath = out.predictor_weights();
    if !wpath.is_file() {
        return Err(Error::Config(format!("{} missing; train the predictor first", wpath.display())));
    }
    let w = PredictorWeights::load(&wpath)?;
    let records: Vec<_> = read_windows_jsonl(&out.human_jsonl())?
        .into_iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    if records.is_empty() {
        return Err(Error::Dataset("no test windows in the human dataset".into()));
    }
    let u = &cfg.uncertainty;
    let n = u.windows.min(records.len());
    let picked: Vec<_> = (0..n).map(|i| &records[i * records.len() / n]).collect();
    let dropout = DropoutSpec { p: u.dropout };
    let dt = 1.0 / CAPTURE_RATE_HZ;
    let p_h = ws.anthropometrics();

    // K values are interleaved per window so slow spells hit every K alike.
    let mut dev = vec![[0.0; 2]; u.ks.len()];
    let mut time = vec![0.0; u.ks.len()];
    for (i, r) in picked.iter().enumerate() {
        let x = window_array(&r.x_flat())?;
        for rep in 0..u.repeats {
            for (j, &k) in u.ks.iter().enumerate() {
                let seed = cfg.seed ^ ((k as u64) << 40) ^ ((i * u.repeats + rep) as u64);
                let t0 = Instant::now();
                let pred = predict_uncertain(&x, &w, k, dropout, seed, r.y.len(), dt)?;
                time[j] += t0.elapsed().as_secs_f64();
                let d = joint_deviations(&pred, p_h)?;
                dev[j][0] += d[0];
                dev[j][1] += d[1];
            }
        }
    }
    let m = (n * u.repeats) as f64;
    let rows: Vec<_> = u
        .ks
        .iter()
        .zip(dev.iter().zip(&time))
        .map(|(&k, (d, t))| KSweepRow {
            k,
            elbow_m: d[0] / m,
            wrist_m: d[1] / m,
            inference_s: t / m,
        })
        .collect();

    let corr_k = *u.ks.iter().max().expect("validated non-empty");
    let mut errs = Vec::new();
    let mut sds = Vec::new();
    for (i, r) in picked.iter().enumerate() {
        let x = window_array(&r.x_flat())?;
        let pred = predict_uncertain(&x, &w, corr_k, dropout, cfg.seed ^ 0xC0_77E1 ^ i as u64, r.y.len(), dt)?;
        for (s, truth) in r.y.iter().enumerate() {
            let e: f64 = (0..6).map(|c| (pred.mean[[s, c]] - truth[c]).powi(2)).sum::<f64>().sqrt();
            let sd: f64 = (0..6).map(|c| pred.variance[[s, c]]).sum::<f64>().sqrt();
            errs.push(e);
            sds.push(sd);
        }
    }
    let corr = pearson(&errs, &sds).unwrap_or(f64::NAN);

    let mut wtr = csv::Writer::from_path(out.k_sweep())?;
    for r in &rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(&out.k_sweep(), e))?;
    let summary = UncertaintySummary {
        rows,
        pearson: corr,
        correlation_k: corr_k,
        points: errs.len(),
        windows: n,
    };
    write_json(&out.uncertainty_summary(), &summary)?;
    Ok(summary)
}
