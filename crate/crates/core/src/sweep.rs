//! Monte Carlo sweeps over the sampling ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, RunStatus};
use crate::rng::derive_seed;
use crate::scenario::ScenarioConfig;
use crate::util::quantile;

/// One pipeline run inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub ratio: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the run aborted with an error.
    pub status: Option<RunStatus>,
    pub error: Option<String>,
    pub gated_samples: usize,
    pub theta0_error_deg: Option<f64>,
    pub phi0_error_deg: Option<f64>,
    /// Aborted runs score zero.
    pub corr_soi: f64,
}

/// Median and interquartile range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Spread> {
        Some(Spread {
            median: quantile(values, 0.5)?,
            iqr: quantile(values, 0.75)? - quantile(values, 0.25)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub rep_rate_hz: f64,
    pub trials: usize,
    /// Trials that aborted or ended in a degenerate status.
    pub failures: usize,
    pub gated_samples: usize,
    pub theta0_error_deg: Option<Spread>,
    pub phi0_error_deg: Option<Spread>,
    pub corr_soi: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialResult>,
}

/// Seed of one trial. Keyed on the ratio value rather than its position so
/// editing the ratio list leaves the other rows untouched.
pub fn trial_seed(master: u64, ratio: f64, trial: usize) -> u64 {
    derive_seed(master, &[ratio.to_bits(), trial as u64])
}

fn run_trial(base: &ScenarioConfig, ratio: f64, trial: usize) -> TrialResult {
    let seed = trial_seed(base.master_seed, ratio, trial);
    let mut cfg = base.clone();
    cfg.master_seed = seed;
    cfg.soi.seed = None;
    cfg.interference.seed = None;
    let outcome = cfg.with_ratio(ratio).and_then(|c| run_pipeline(&c));
    match outcome {
        Ok(r) => TrialResult {
            ratio,
            trial,
            seed,
            status: Some(r.status),
            error: None,
            gated_samples: r.gated_samples,
            theta0_error_deg: Some(r.angle_errors.theta0_deg),
            phi0_error_deg: r.angle_errors.phi0_deg,
            corr_soi: r.separation.corr_soi,
        },
        Err(e) => TrialResult {
            ratio,
            trial,
            seed,
            status: None,
            error: Some(e.to_string()),
            gated_samples: 0,
            theta0_error_deg: None,
            phi0_error_deg: None,
            corr_soi: 0.0,
        },
    }
}

/// Runs `trials` independent realizations at each ratio. Trials run in
/// parallel; results are identical for any thread count.
pub fn run_sweep(base: &ScenarioConfig, ratios: &[f64], trials: usize) -> Result<SweepReport> {
    if ratios.is_empty() {
        return Err(Error::config("sweep needs at least one ratio"));
    }
    if trials == 0 {
        return Err(Error::config("sweep needs at least one trial"));
    }
    let mut rep_rates = Vec::with_capacity(ratios.len());
    for &r in ratios {
        rep_rates.push(base.with_ratio(r)?.pulse.rep_rate_hz);
    }
    let jobs: Vec<(f64, usize)> = ratios
        .iter()
        .flat_map(|&r| (0..trials).map(move |t| (r, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(r, t)| run_trial(base, r, t))
        .collect();

    let rows = ratios
        .iter()
        .zip(&rep_rates)
        .zip(results.chunks(trials))
        .map(|((&ratio, &rep_rate_hz), chunk)| {
            let theta: Vec<f64> = chunk.iter().filter_map(|t| t.theta0_error_deg).collect();
            let phi: Vec<f64> = chunk.iter().filter_map(|t| t.phi0_error_deg).collect();
            let corr: Vec<f64> = chunk.iter().map(|t| t.corr_soi).collect();
            let mut gated: Vec<f64> = chunk.iter().map(|t| t.gated_samples as f64).collect();
            gated.sort_by(f64::total_cmp);
            SweepRow {
                ratio,
                rep_rate_hz,
                trials: chunk.len(),
                failures: chunk
                    .iter()
                    .filter(|t| t.status != Some(RunStatus::Ok))
                    .count(),
                gated_samples: gated[gated.len() / 2] as usize,
                theta0_error_deg: Spread::of(&theta),
                phi0_error_deg: Spread::of(&phi),
                corr_soi: Spread::of(&corr).expect("at least one trial"),
            }
        })
        .collect();
    Ok(SweepReport {
        master_seed: base.master_seed,
        rows,
        trials: results,
    })
}
