//! Gaussian kernel density estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;

/// Minimum number of grid points of a [`DensityEstimate`].
pub const MIN_GRID_POINTS: usize = 512;
const MAX_GRID_POINTS: usize = 8192;
/// Grid spacing target, as a fraction of the bandwidth.
const SPACING_PER_BANDWIDTH: f64 = 0.25;
/// The grid extends this many bandwidths beyond the sample range.
const GRID_PAD: f64 = 3.0;
/// Kernel support, in bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

/// Density evaluated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// Ascending grid of frequency values (Hz).
    pub grid: Vec<f64>,
    /// Density at each grid point (1/Hz).
    pub density: Vec<f64>,
    /// Kernel standard deviation (Hz).
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Grid locations of strict local maxima of the density.
    pub fn local_maxima(&self) -> Vec<f64> {
        let d = &self.density;
        (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1])
            .map(|i| self.grid[i])
            .collect()
    }

    /// Grid location of the global maximum.
    pub fn mode(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        self.grid[i]
    }
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
///
/// Falls back to the standard deviation when the IQR is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    let sd = crate::moments::moments(samples)?.std_dev();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian KDE on a uniform grid spanning `[min - 3h, max + 3h]`.
///
/// Samples are linearly binned onto the grid and convolved with the sampled
/// kernel. The kernel weights are normalized on the grid, so the estimate
/// integrates to one up to the mass beyond the padded range.
pub fn kde(samples: &[f64], bandwidth: Option<f64>) -> Result<DensityEstimate> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: n });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        return Err(Error::DegenerateDistribution("zero variance"));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(samples)?,
    };

    let start = lo - GRID_PAD * h;
    let span = (hi - lo) + 2.0 * GRID_PAD * h;
    let wanted = (span / (SPACING_PER_BANDWIDTH * h)).ceil() as usize + 1;
    let m = wanted.clamp(MIN_GRID_POINTS, MAX_GRID_POINTS);
    let step = span / (m - 1) as f64;
    let grid: Vec<f64> = (0..m).map(|i| start + i as f64 * step).collect();

    let mut bins = vec![0.0; m];
    for &x in samples {
        let pos = (x - start) / step;
        let i = (pos.floor() as usize).min(m - 2);
        let frac = pos - i as f64;
        bins[i] += 1.0 - frac;
        bins[i + 1] += frac;
    }

    let half = ((KERNEL_CUTOFF * h / step).ceil() as usize).min(m - 1);
    let mut kernel: Vec<f64> = (0..=half)
        .map(|k| {
            let u = k as f64 * step / h;
            (-0.5 * u * u).exp()
        })
        .collect();
    let norm = (kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>()) * step * n as f64;
    kernel.iter_mut().for_each(|w| *w /= norm);

    let mut density = vec![0.0; m];
    for (j, &w) in bins.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let a = j.saturating_sub(half);
        let b = (j + half).min(m - 1);
        for (i, d) in density[a..=b].iter_mut().enumerate() {
            *d += w * kernel[(a + i).abs_diff(j)];
        }
    }

    Ok(DensityEstimate { grid, density, bandwidth: h })
}
