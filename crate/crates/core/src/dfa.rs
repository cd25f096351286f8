//! Detrended fluctuation analysis.
//!
//! The profile of each segment (cumulative sum of the mean-removed signal) is
//! cut into non-overlapping windows of size `n`, taken once from the start
//! and once from the end so that no tail is ignored. Each window is
//! detrended by a least-squares polynomial and `F(n)` is the RMS of all
//! residuals. The log-log slope of `F(n)` is the DFA exponent; the reported
//! Hurst index is that slope minus one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linear_fit;
use crate::series::SegmentedSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaConfig {
    /// Explicit window sizes; when `None` they are log-spaced between
    /// `min_scale` and `max_scale`.
    pub windows: Option<Vec<usize>>,
    pub min_scale: usize,
    /// Upper scale; defaults to `min(1e6, longest segment / 4)`.
    pub max_scale: Option<usize>,
    pub n_scales: usize,
    /// Polynomial detrending order.
    pub order: usize,
    /// Window-size range `[lo, hi]` used for the slope; all scales if `None`.
    pub fit_range: Option<[usize; 2]>,
}

impl Default for DfaConfig {
    fn default() -> Self {
        Self { windows: None, min_scale: 5, max_scale: None, n_scales: 24, order: 1, fit_range: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    pub window_sizes: Vec<usize>,
    pub fluctuation: Vec<f64>,
    pub slope: f64,
    /// `slope - 1`.
    pub hurst: f64,
    /// Window-size range actually used for the slope.
    pub fit_range: [usize; 2],
    pub order: usize,
}

/// Up to `count` distinct integer sizes, log-spaced over `[lo, hi]`.
pub fn log_spaced_windows(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> =
        (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as usize).collect();
    out.dedup();
    out
}

/// Orthonormal discrete polynomial basis of degree `1..=order` on the points
/// `0..n`, each orthogonal to constants. Constants are handled by centering.
fn polynomial_basis(n: usize, order: usize) -> Vec<Vec<f64>> {
    let center = (n as f64 - 1.0) / 2.0;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order);
    for degree in 1..=order {
        let mut p: Vec<f64> = (0..n).map(|i| (i as f64 - center).powi(degree as i32)).collect();
        // two Gram-Schmidt passes keep higher orders orthogonal
        for _ in 0..2 {
            let m = p.iter().sum::<f64>() / n as f64;
            p.iter_mut().for_each(|v| *v -= m);
            for q in &basis {
                let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                p.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.iter_mut().for_each(|v| *v /= norm);
        basis.push(p);
    }
    basis
}

/// Residual sum of squares of one window after polynomial detrending.
fn window_rss(window: &[f64], basis: &[Vec<f64>], scratch: &mut Vec<f64>) -> f64 {
    let m = window.iter().sum::<f64>() / window.len() as f64;
    scratch.clear();
    scratch.extend(window.iter().map(|v| v - m));
    for q in basis {
        let dot: f64 = scratch.iter().zip(q).map(|(a, b)| a * b).sum();
        scratch.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
    }
    scratch.iter().map(|r| r * r).sum()
}

/// `F(n)` pooled over all profiles, or `None` when no profile holds a
/// window of this size.
fn fluctuation(profiles: &[Vec<f64>], n: usize, order: usize) -> Option<f64> {
    let basis = polynomial_basis(n, order);
    let mut scratch = Vec::with_capacity(n);
    let (mut rss, mut count) = (0.0, 0usize);
    for y in profiles {
        let windows = y.len() / n;
        if windows == 0 {
            continue;
        }
        let tail = y.len() - windows * n;
        for w in 0..windows {
            rss += window_rss(&y[w * n..(w + 1) * n], &basis, &mut scratch);
            rss += window_rss(&y[tail + w * n..tail + (w + 1) * n], &basis, &mut scratch);
        }
        count += 2 * windows * n;
    }
    (count > 0).then(|| (rss / count as f64).sqrt())
}

/// Profiles (cumulative sums of the mean-removed values) of every segment.
fn profiles(series: &SegmentedSeries) -> Vec<Vec<f64>> {
    series
        .segments
        .iter()
        .map(|seg| {
            let m = crate::numeric::mean(&seg.values);
            let mut acc = 0.0;
            seg.values
                .iter()
                .map(|v| {
                    acc += v - m;
                    acc
                })
                .collect()
        })
        .collect()
}

/// Detrended fluctuation analysis over the configured window sizes.
pub fn dfa(series: &SegmentedSeries, config: &DfaConfig) -> Result<DfaResult> {
    let longest = series.longest().ok_or(Error::InputEmpty)?.len();
    let smallest = config.order + 2;
    let largest = longest / 4;
    let windows = match &config.windows {
        Some(w) => {
            if w.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::InvalidParameter("window sizes must be strictly ascending".into()));
            }
            w.clone()
        }
        None => {
            let hi = config.max_scale.unwrap_or(1_000_000).min(largest);
            log_spaced_windows(config.min_scale.max(smallest), hi, config.n_scales)
        }
    };
    let usable: Vec<usize> = windows.into_iter().filter(|&n| n >= smallest && n <= largest).collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientScales { usable: usable.len() });
    }

    let profiles = profiles(series);
    let fluct: Vec<f64> =
        usable.par_iter().map(|&n| fluctuation(&profiles, n, config.order).unwrap_or(0.0)).collect();
    if fluct.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::DegenerateDistribution("zero fluctuation at some window size"));
    }

    let [lo, hi] = config.fit_range.unwrap_or([usable[0], usable[usable.len() - 1]]);
    let (x, y): (Vec<f64>, Vec<f64>) = usable
        .iter()
        .zip(&fluct)
        .filter(|(n, _)| **n >= lo && **n <= hi)
        .map(|(&n, &f)| ((n as f64).ln(), f.ln()))
        .unzip();
    if x.len() < 2 {
        return Err(Error::InsufficientScales { usable: x.len() });
    }
    let (slope, _, _) = linear_fit(&x, &y);
    let in_range: Vec<usize> = usable.iter().copied().filter(|n| (lo..=hi).contains(n)).collect();
    Ok(DfaResult {
        fit_range: [in_range[0], in_range[in_range.len() - 1]],
        window_sizes: usable,
        fluctuation: fluct,
        slope,
        hurst: slope - 1.0,
        order: config.order,
    })
}
