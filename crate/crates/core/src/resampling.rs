//! Bootstrap confidence intervals for fidelity metrics and for paired
//! differences between two generation variants.
//!
//! Each resample iteration draws its row indices from RNG streams derived
//! from `(seed, iteration)`, so results are identical however rayon
//! schedules the iterations.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MetricError;
use crate::fidelity::{energy_distance_sq, mae_v, mean_jsd};
use crate::privacy::quantile_sorted;
use crate::rng::stream_rng;
use crate::table::CategoricalTable;

pub const MIN_RESAMPLES: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ResamplingError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("need at least {MIN_RESAMPLES} resamples, got {0}")]
    InsufficientResamples(usize),
}

/// Error-directed fidelity metric; lower is better for all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMetric {
    Jsd,
    MaeV,
    Ed2,
}

impl FidelityMetric {
    pub const ALL: [FidelityMetric; 3] = [Self::Jsd, Self::MaeV, Self::Ed2];

    pub fn evaluate(self, real: &CategoricalTable, syn: &CategoricalTable) -> Result<f64, MetricError> {
        match self {
            Self::Jsd => mean_jsd(real, syn),
            Self::MaeV => mae_v(real, syn).map(|m| m.error),
            Self::Ed2 => energy_distance_sq(real, syn),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Jsd => "jsd",
            Self::MaeV => "mae_v",
            Self::Ed2 => "ed2",
        }
    }
}

impl std::str::FromStr for FidelityMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsd" => Ok(Self::Jsd),
            "mae_v" => Ok(Self::MaeV),
            "ed2" => Ok(Self::Ed2),
            other => Err(format!("unknown metric `{other}` (expected jsd, mae_v or ed2)")),
        }
    }
}

/// Point estimate with a 95% percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub metric_name: FidelityMetric,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

fn resample_indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn percentile_interval(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (quantile_sorted(&values, 0.025), quantile_sorted(&values, 0.975))
}

fn check_resamples(n_resamples: usize) -> Result<(), ResamplingError> {
    if n_resamples < MIN_RESAMPLES {
        return Err(ResamplingError::InsufficientResamples(n_resamples));
    }
    Ok(())
}

/// Paired bootstrap of `metric(real, syn_a) - metric(real, syn_b)`.
///
/// Positive deltas mean `syn_b` is closer to `real` than `syn_a`. Every
/// iteration resamples all three tables with replacement at their original
/// sizes, and both variants are scored against the same resampled real
/// table. The two variants draw their indices from one shared stream, so
/// swapping them negates every resampled delta.
pub fn bootstrap_delta(
    real: &CategoricalTable,
    syn_a: &CategoricalTable,
    syn_b: &CategoricalTable,
    metric: FidelityMetric,
    n_resamples: usize,
    seed: u64,
) -> Result<DeltaEstimate, ResamplingError> {
    if real.schema() != syn_a.schema() || real.schema() != syn_b.schema() {
        return Err(MetricError::SchemaMismatch.into());
    }
    check_resamples(n_resamples)?;
    let point = metric.evaluate(real, syn_a)? - metric.evaluate(real, syn_b)?;
    let deltas = (0..n_resamples as u64)
        .into_par_iter()
        .map(|b| {
            let real_star = real.select_rows(&resample_indices(&mut stream_rng(seed, 2 * b), real.n_rows()));
            let a_star = syn_a.select_rows(&resample_indices(&mut stream_rng(seed, 2 * b + 1), syn_a.n_rows()));
            let b_star = syn_b.select_rows(&resample_indices(&mut stream_rng(seed, 2 * b + 1), syn_b.n_rows()));
            Ok(metric.evaluate(&real_star, &a_star)? - metric.evaluate(&real_star, &b_star)?)
        })
        .collect::<Result<Vec<f64>, MetricError>>()?;
    let (ci_low, ci_high) = percentile_interval(deltas);
    Ok(DeltaEstimate {
        metric_name: metric,
        point,
        ci_low,
        ci_high,
        n_resamples,
        seed,
    })
}

/// Bootstrap interval for `metric(real, syn)` itself.
///
/// Both tables are resampled each iteration from one shared index stream;
/// when they have the same size they receive the same row positions.
pub fn metric_ci(
    real: &CategoricalTable,
    syn: &CategoricalTable,
    metric: FidelityMetric,
    n_resamples: usize,
    seed: u64,
) -> Result<DeltaEstimate, ResamplingError> {
    if real.schema() != syn.schema() {
        return Err(MetricError::SchemaMismatch.into());
    }
    check_resamples(n_resamples)?;
    let point = metric.evaluate(real, syn)?;
    let values = (0..n_resamples as u64)
        .into_par_iter()
        .map(|b| {
            let real_star = real.select_rows(&resample_indices(&mut stream_rng(seed, b), real.n_rows()));
            let syn_star = syn.select_rows(&resample_indices(&mut stream_rng(seed, b), syn.n_rows()));
            metric.evaluate(&real_star, &syn_star)
        })
        .collect::<Result<Vec<f64>, MetricError>>()?;
    let (ci_low, ci_high) = percentile_interval(values);
    Ok(DeltaEstimate {
        metric_name: metric,
        point,
        ci_low,
        ci_high,
        n_resamples,
        seed,
    })
}
