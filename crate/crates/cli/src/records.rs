//! Per-trial records and per-group summaries.

use serde::Serialize;

use rfkl::approx::median;

use crate::error::CliResult;
use crate::output::Cell;

/// CSV columns of a [`RunRecord`]. Runtime is reported in the JSON side file
/// only, so CSV output does not depend on timing.
pub const RUN_COLUMNS: [&str; 9] = ["trial", "n", "m", "T", "seed", "kl_hat", "kl_true", "abs_err", "schedule"];

/// The same layout for mutual information runs.
pub const MI_COLUMNS: [&str; 9] = ["trial", "n", "m", "T", "seed", "mi_hat", "mi_true", "abs_err", "schedule"];

/// One trial. `m` and `T` are empty for the nearest-neighbour baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub trial: usize,
    pub n: usize,
    pub m: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<u64>,
    pub seed: u64,
    pub kl_hat: f64,
    pub kl_true: f64,
    pub abs_err: f64,
    pub runtime_ms: f64,
    pub schedule: String,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(trial: usize, n: usize, m: Option<usize>, t: Option<u64>, seed: u64, kl_hat: f64, kl_true: f64, runtime_ms: f64, schedule: impl Into<String>) -> Self {
        Self { trial, n, m, t, seed, kl_hat, kl_true, abs_err: (kl_hat - kl_true).abs(), runtime_ms: runtime_ms.max(0.0), schedule: schedule.into() }
    }

    pub fn cells(&self) -> Vec<Cell> {
        vec![
            self.trial.into(),
            self.n.into(),
            self.m.into(),
            self.t.into(),
            self.seed.into(),
            self.kl_hat.into(),
            self.kl_true.into(),
            self.abs_err.into(),
            self.schedule.as_str().into(),
        ]
    }
}

pub const SUMMARY_COLUMNS: [&str; 8] = ["param", "value", "trials", "median_err", "mean_err", "std_err_of_mean", "err_lo", "err_hi"];

/// Error statistics of one sweep value; `err_lo`/`err_hi` are the mean
/// minus/plus three standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub param: String,
    pub value: u64,
    pub trials: usize,
    pub median_err: f64,
    pub mean_err: f64,
    /// Sample standard deviation over `sqrt(trials)`; undefined for one trial.
    pub std_err_of_mean: Option<f64>,
    pub err_lo: Option<f64>,
    pub err_hi: Option<f64>,
}

impl SweepSummary {
    pub fn from_errors(param: &str, value: u64, errors: &[f64]) -> CliResult<Self> {
        let k = errors.len();
        let mean = errors.iter().sum::<f64>() / k as f64;
        let sem = (k > 1).then(|| {
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        });
        Ok(Self {
            param: param.to_string(),
            value,
            trials: k,
            median_err: median(errors)?,
            mean_err: mean,
            std_err_of_mean: sem,
            err_lo: sem.map(|s| mean - 3.0 * s),
            err_hi: sem.map(|s| mean + 3.0 * s),
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        vec![
            self.param.as_str().into(),
            self.value.into(),
            self.trials.into(),
            self.median_err.into(),
            self.mean_err.into(),
            self.std_err_of_mean.into(),
            self.err_lo.into(),
            self.err_hi.into(),
        ]
    }
}
