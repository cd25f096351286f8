//! Autocorrelation function and exponential decay fits.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{lag_in_samples, SegmentedSeries};

/// Default largest ACF lag, in seconds (six hours).
pub const DEFAULT_ACF_MAX_LAG: f64 = 21_600.0;
/// Default exponential fit window, in seconds (one hour).
pub const DEFAULT_FIT_WINDOW: f64 = 3_600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    /// Lags in seconds, starting at zero.
    pub lags: Vec<f64>,
    pub acf: Vec<f64>,
    /// Number of sample pairs contributing at each lag.
    pub n_effective: Vec<usize>,
}

/// Lag-`k` sums `sum_t d[t] d[t + k]` for `k = 0..=max_k`, via zero-padded FFT.
fn lagged_products(d: &[f64], max_k: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let size = (d.len() + max_k + 1).next_power_of_two();
    let mut buf: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex64::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    buf[..=max_k.min(d.len() - 1)].iter().map(|c| c.re * scale).collect()
}

/// Autocorrelation for lags `0..=max_lag`, pooled across segments.
///
/// Deviations are taken from the mean of all samples. Lagged products are
/// summed within each segment, never across a gap, and every lag is divided
/// by the same total sum of squares, so the estimate is positive
/// semi-definite and bounded by one.
pub fn acf(series: &SegmentedSeries, max_lag: f64) -> Result<AcfResult> {
    let longest = series.longest().ok_or(Error::InputEmpty)?;
    let dt = longest.dt;
    let max_k = lag_in_samples(max_lag, dt)?;
    if longest.len() < 4 * max_k {
        return Err(Error::LagExceedsSeries { lag: max_k, len: longest.len() });
    }
    let pooled = series.pooled_values();
    let mean = crate::numeric::mean(&pooled);

    let mut planner = FftPlanner::new();
    let mut sums = vec![0.0; max_k + 1];
    let mut n_effective = vec![0; max_k + 1];
    for seg in &series.segments {
        let d: Vec<f64> = seg.values.iter().map(|v| v - mean).collect();
        for (k, p) in lagged_products(&d, max_k, &mut planner).into_iter().enumerate() {
            sums[k] += p;
            n_effective[k] += seg.len() - k;
        }
    }
    // the lag-0 sum is recomputed directly; the FFT value carries round-off
    let total: f64 = pooled.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateDistribution("zero variance"));
    }
    let mut values: Vec<f64> = sums.iter().map(|s| (s / total).clamp(-1.0, 1.0)).collect();
    values[0] = 1.0;
    let lags = (0..=max_k).map(|k| k as f64 * dt).collect();
    Ok(AcfResult { lags, acf: values, n_effective })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    /// Decay constant in 1/s.
    pub lambda: f64,
    /// Lag range of the fit in seconds.
    pub fit_range: [f64; 2],
    pub r_squared: f64,
    /// Objective evaluations used by the minimizer.
    pub iterations: usize,
}

const GRID_POINTS: usize = 241;
const MAX_ITERATIONS: usize = 200;

struct Objective<'a> {
    tau: &'a [f64],
    acf: &'a [f64],
    evaluations: usize,
}

impl Objective<'_> {
    fn value(&mut self, lambda: f64) -> f64 {
        self.evaluations += 1;
        self.tau.iter().zip(self.acf).map(|(t, a)| (a - (-lambda * t).exp()).powi(2)).sum()
    }

    /// First and second derivative in `lambda`.
    fn derivatives(&self, lambda: f64) -> (f64, f64) {
        let (mut g, mut h) = (0.0, 0.0);
        for (t, a) in self.tau.iter().zip(self.acf) {
            let e = (-lambda * t).exp();
            let r = a - e;
            g += 2.0 * r * t * e;
            h += 2.0 * t * t * e * (e - r);
        }
        (g, h)
    }
}

/// Brent's minimizer on `[a, b]` in the variable `u = ln(lambda)`.
fn brent(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64, usize) {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for iter in 0..MAX_ITERATIONS {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return (x, fx, iter);
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx, MAX_ITERATIONS)
}

/// Least-squares fit of `exp(-lambda tau)` to the ACF on `[dt, fit_window]`.
///
/// A logarithmic scan over `lambda` brackets the global minimum, Brent's
/// method refines it and a few guarded Newton steps polish the root of the
/// gradient. A minimum at the edge of the scanned range or a non-finite
/// result is reported as [`Error::FitDiverged`].
pub fn fit_exp_decay(acf: &AcfResult, fit_window: f64) -> Result<ExpDecayFit> {
    if acf.lags.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: acf.lags.len() });
    }
    let dt = acf.lags[1] - acf.lags[0];
    let k = lag_in_samples(fit_window, dt)?;
    if k >= acf.lags.len() {
        return Err(Error::LagExceedsSeries { lag: k, len: acf.lags.len() });
    }
    let tau = &acf.lags[1..=k];
    let values = &acf.acf[1..=k];
    let mut obj = Objective { tau, acf: values, evaluations: 0 };

    // exp(-lambda tau) is ~1 across the window at the low end and has
    // vanished by the first lag at the high end
    let (lo, hi) = ((1e-4 / fit_window).ln(), (50.0 / dt).ln());
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).collect();
    let scores: Vec<f64> = grid.iter().map(|&u| obj.value(u.exp())).collect();
    let best = (0..GRID_POINTS).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
    if best == 0 || best == GRID_POINTS - 1 || !scores[best].is_finite() {
        return Err(Error::FitDiverged {
            reason: "minimum at the edge of the scanned decay range",
            lambda: grid[best].exp(),
            iterations: obj.evaluations,
        });
    }

    let (u, _, _) = brent(&mut |u| obj.value(u.exp()), grid[best - 1], grid[best + 1], 1e-12);
    let mut lambda = u.exp();
    let mut current = obj.value(lambda);
    for _ in 0..4 {
        let (g, h) = obj.derivatives(lambda);
        if !(h > 0.0) {
            break;
        }
        let step = lambda - g / h;
        if !(step > 0.0) {
            break;
        }
        let trial = obj.value(step);
        if trial > current {
            break;
        }
        (lambda, current) = (step, trial);
    }
    if !lambda.is_finite() || !current.is_finite() {
        return Err(Error::FitDiverged { reason: "non-finite objective", lambda, iterations: obj.evaluations });
    }

    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let total: f64 = values.iter().map(|a| (a - mean).powi(2)).sum();
    let r_squared = if total > 0.0 { 1.0 - current / total } else if current == 0.0 { 1.0 } else { 0.0 };
    Ok(ExpDecayFit { lambda, fit_range: [tau[0], tau[k - 1]], r_squared, iterations: obj.evaluations })
}
