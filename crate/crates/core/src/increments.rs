//! Distribution of frequency increments at a fixed lag.

use serde::{Deserialize, Serialize};

use crate::density::{kde, DensityEstimate};
use crate::error::Result;
use crate::moments::{moments, MomentSummary};
use crate::series::SegmentedSeries;

/// Thresholds, in standard deviations, for the reported tail exceedances.
pub const TAIL_THRESHOLDS: [f64; 2] = [3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailExceedance {
    /// Threshold in units of the increment standard deviation.
    pub k: f64,
    /// Fraction of increments with `|x - mean| > k * sigma`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    /// Lag in seconds.
    pub tau: f64,
    pub moments: MomentSummary,
    pub density: DensityEstimate,
    pub tail_exceedance: Vec<TailExceedance>,
}

/// Fraction of samples farther than `k` standard deviations from the mean,
/// for each `k`.
pub fn tail_exceedance(samples: &[f64], summary: &MomentSummary, ks: &[f64]) -> Vec<TailExceedance> {
    let sigma = summary.std_dev();
    ks.iter()
        .map(|&k| {
            let limit = k * sigma;
            let count = samples.iter().filter(|&&x| (x - summary.mean).abs() > limit).count();
            TailExceedance { k, fraction: count as f64 / samples.len() as f64 }
        })
        .collect()
}

/// Moments, density and tail exceedances of the lag-`tau` increments.
///
/// Increments are taken within each segment and pooled; segments not longer
/// than the lag are skipped. The density uses Silverman's bandwidth unless
/// one is given.
pub fn increment_report(series: &SegmentedSeries, tau: f64, bandwidth: Option<f64>) -> Result<IncrementReport> {
    let increments = series.increments(tau)?;
    let summary = moments(&increments.values)?;
    let density = kde(&increments.values, bandwidth)?;
    let tail_exceedance = tail_exceedance(&increments.values, &summary, &TAIL_THRESHOLDS);
    Ok(IncrementReport { tau, moments: summary, density, tail_exceedance })
}
