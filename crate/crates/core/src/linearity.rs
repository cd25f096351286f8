//! Time-reversal linearity test with Fourier phase-randomized surrogates.
//!
//! The LT statistic at lag `tau` is the ratio of the time-averaged third and
//! second powers of `f(t) - f(t + tau)`. A linear Gaussian process is
//! time-reversible and gives LT close to zero at every lag. Surrogates keep
//! the amplitude spectrum of the data and draw fresh phases, which keeps the
//! linear correlation structure and destroys everything else; the RMSE
//! between the LT curve of the data and the mean surrogate curve measures
//! the departure from linearity.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{lag_in_samples, FrequencySeries};

/// Shortest series accepted by the surrogate generator.
pub const MIN_SURROGATE_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityConfig {
    /// Largest lag of the LT curve, in seconds.
    pub max_lag: f64,
    pub n_surrogates: usize,
}

impl Default for LinearityConfig {
    fn default() -> Self {
        Self { max_lag: 60.0, n_surrogates: 19 }
    }
}

/// LT values over the lag grid `dt, 2 dt, ..., max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtCurve {
    /// Lags in seconds.
    pub lags: Vec<f64>,
    /// LT values in Hz.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityResult {
    pub lags: Vec<f64>,
    pub lt_data: Vec<f64>,
    pub lt_surrogate_mean: Vec<f64>,
    /// Root-mean-square difference of the two curves over the lag grid (Hz).
    pub rmse: f64,
    pub n_surrogates: usize,
}

fn max_lag_samples(len: usize, dt: f64, max_lag: f64) -> Result<usize> {
    let k = lag_in_samples(max_lag, dt)?;
    if 4 * k >= len {
        return Err(Error::LagExceedsSeries { lag: k, len });
    }
    Ok(k)
}

fn lt_values(values: &[f64], max_k: usize) -> Result<Vec<f64>> {
    (1..=max_k)
        .map(|k| {
            let (mut s2, mut s3) = (0.0, 0.0);
            for (a, b) in values.iter().zip(&values[k..]) {
                let d = a - b;
                let d2 = d * d;
                s2 += d2;
                s3 += d2 * d;
            }
            if s2 > 0.0 {
                Ok(s3 / s2)
            } else {
                Err(Error::DegenerateDistribution("zero increment variance at some lag"))
            }
        })
        .collect()
}

/// LT statistic `<(f(t) - f(t+tau))^3> / <(f(t) - f(t+tau))^2>` for every lag
/// from `dt` to `max_lag`.
///
/// `max_lag` must be a multiple of `dt` and shorter than a quarter of the
/// series duration.
pub fn lt_curve(series: &FrequencySeries, max_lag: f64) -> Result<LtCurve> {
    let max_k = max_lag_samples(series.len(), series.dt, max_lag)?;
    let values = lt_values(&series.values, max_k)?;
    let lags = (1..=max_k).map(|k| k as f64 * series.dt).collect();
    Ok(LtCurve { lags, values })
}

/// One-sided Fourier representation of a real series.
///
/// Component `k` (for `k = 0..=n/2`) of the transform of the mean-removed
/// series is stored as amplitude and phase; the remaining components follow
/// from Hermitian symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRepresentation {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Length of the original series.
    pub n: usize,
    /// Mean removed before the transform.
    pub mean: f64,
}

impl SpectrumRepresentation {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Self::with_plan(values, fft.as_ref())
    }

    fn with_plan(values: &[f64], fft: &dyn Fft<f64>) -> Self {
        let n = values.len();
        let mean = crate::numeric::mean(values);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
        fft.process(&mut buf);
        let half = n / 2;
        let (amplitudes, phases) = buf[..=half].iter().map(|c| (c.norm(), c.arg())).unzip();
        Self { amplitudes, phases, n, mean }
    }

    /// Inverse transform back to a real series.
    pub fn to_values(&self) -> Vec<f64> {
        let ifft = FftPlanner::new().plan_fft_inverse(self.n);
        self.invert_with(ifft.as_ref())
    }

    fn invert_with(&self, ifft: &dyn Fft<f64>) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, (&a, &p)) in self.amplitudes.iter().zip(&self.phases).enumerate() {
            let c = Complex64::from_polar(a, p);
            buf[k] = c;
            if k != 0 && k != n - k {
                buf[n - k] = c.conj();
            }
        }
        // DC and, for even n, Nyquist must be real
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|c| c.re * scale + self.mean).collect()
    }

    /// Same amplitudes with uniform random phases on every component
    /// except DC and Nyquist, which keep their original (real) values.
    pub fn randomized<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let n = self.n;
        let phases = self
            .phases
            .iter()
            .enumerate()
            .map(|(k, &p)| if k == 0 || 2 * k == n { p } else { rng.random::<f64>() * TAU })
            .collect();
        Self { amplitudes: self.amplitudes.clone(), phases, n, mean: self.mean }
    }
}

fn surrogate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn check_surrogate_len(len: usize) -> Result<()> {
    if len < MIN_SURROGATE_LEN {
        return Err(Error::TooFewSamples { needed: MIN_SURROGATE_LEN, got: len });
    }
    Ok(())
}

/// Phase-randomized surrogate with the amplitude spectrum and mean of
/// `series`.
pub fn phase_surrogate(series: &FrequencySeries, seed: u64) -> Result<FrequencySeries> {
    check_surrogate_len(series.len())?;
    let spectrum = SpectrumRepresentation::from_values(&series.values);
    let values = spectrum.randomized(&mut surrogate_rng(seed, 0)).to_values();
    Ok(FrequencySeries { values, ..series.clone() })
}

fn root_mean_square_difference(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (sum / a.len() as f64).sqrt()
}

fn finish(curve: LtCurve, surrogate_curves: Vec<Vec<f64>>) -> LinearityResult {
    let count = surrogate_curves.len();
    let mut mean = vec![0.0; curve.values.len()];
    // fixed summation order, independent of thread scheduling
    for c in &surrogate_curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let rmse = root_mean_square_difference(&curve.values, &mean);
    LinearityResult { lags: curve.lags, lt_data: curve.values, lt_surrogate_mean: mean, rmse, n_surrogates: count }
}

/// LT curve of `series` against the mean LT curve of `n_surrogates`
/// phase-randomized surrogates.
///
/// Surrogate `r` uses its own random stream derived from `seed`, so the
/// result is identical for any thread count.
pub fn lt_rmse(series: &FrequencySeries, config: &LinearityConfig, seed: u64) -> Result<LinearityResult> {
    if config.n_surrogates == 0 {
        return Err(Error::InvalidParameter("at least one surrogate is required".into()));
    }
    check_surrogate_len(series.len())?;
    let curve = lt_curve(series, config.max_lag)?;
    let max_k = curve.lags.len();

    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(series.len());
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(series.len());
    let spectrum = SpectrumRepresentation::with_plan(&series.values, forward.as_ref());

    let surrogate_curves = (0..config.n_surrogates as u64)
        .into_par_iter()
        .map(|r| {
            let values = spectrum.randomized(&mut surrogate_rng(seed, r)).invert_with(inverse.as_ref());
            lt_values(&values, max_k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(curve, surrogate_curves))
}

/// [`lt_rmse`] against caller-supplied surrogate series.
pub fn lt_rmse_against(series: &FrequencySeries, surrogates: &[FrequencySeries], max_lag: f64) -> Result<LinearityResult> {
    if surrogates.is_empty() {
        return Err(Error::InvalidParameter("at least one surrogate is required".into()));
    }
    let curve = lt_curve(series, max_lag)?;
    let surrogate_curves = surrogates
        .iter()
        .map(|s| {
            if s.len() != series.len() || s.dt != series.dt {
                return Err(Error::InvalidParameter("surrogate length or dt differs from the data".into()));
            }
            lt_values(&s.values, curve.lags.len())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(curve, surrogate_curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn series(values: Vec<f64>) -> FrequencySeries {
        FrequencySeries::new(values, 0.0, 1.0, "test").unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| 50.0 + 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
    }

    #[test]
    fn hand_computed_lt() {
        // differences at lag 1: -1, -2, 3 -> sum d^3 = 18, sum d^2 = 14
        let s = series(vec![0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let c = lt_curve(&s, 1.0).unwrap();
        assert_eq!(c.lags, vec![1.0]);
        assert!((c.values[0] - 18.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn lag_limits() {
        let s = series(noise(100, 1));
        assert!(lt_curve(&s, 24.0).is_ok());
        assert!(matches!(lt_curve(&s, 25.0), Err(Error::LagExceedsSeries { .. })));
        assert!(matches!(lt_curve(&s, 2.5), Err(Error::LagNotAligned { .. })));
    }

    #[test]
    fn constant_series_is_degenerate() {
        let s = series(vec![50.0; 100]);
        assert!(matches!(lt_curve(&s, 5.0), Err(Error::DegenerateDistribution(_))));
    }

    #[test]
    fn time_reversal_flips_sign() {
        let v = noise(2000, 3).iter().map(|x| (x - 50.0).powi(3)).collect::<Vec<_>>();
        let fwd = lt_curve(&series(v.clone()), 30.0).unwrap();
        let rev = lt_curve(&series(v.into_iter().rev().collect()), 30.0).unwrap();
        for (a, b) in fwd.values.iter().zip(&rev.values) {
            assert!((a + b).abs() <= 1e-10 * a.abs().max(1e-12), "{a} {b}");
        }
    }

    #[test]
    fn spectrum_round_trip() {
        for n in [16, 17, 1000, 1023] {
            let v = noise(n, n as u64);
            let back = SpectrumRepresentation::from_values(&v).to_values();
            for (a, b) in v.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }
    }

    #[test]
    fn surrogate_keeps_amplitudes_and_mean() {
        for n in [64, 999] {
            let s = series(noise(n, 7));
            let sur = phase_surrogate(&s, 11).unwrap();
            let a = SpectrumRepresentation::from_values(&s.values);
            let b = SpectrumRepresentation::from_values(&sur.values);
            for k in 1..a.amplitudes.len() {
                let rel = (a.amplitudes[k] - b.amplitudes[k]).abs() / a.amplitudes[k];
                assert!(rel < 1e-9, "k={k} rel={rel}");
            }
            assert!((a.mean - b.mean).abs() <= 1e-9 * a.mean.abs());
            assert_ne!(sur.values, s.values);
        }
    }

    #[test]
    fn surrogate_is_seeded() {
        let s = series(noise(256, 2));
        assert_eq!(phase_surrogate(&s, 5).unwrap(), phase_surrogate(&s, 5).unwrap());
        assert_ne!(phase_surrogate(&s, 5).unwrap(), phase_surrogate(&s, 6).unwrap());
        assert!(matches!(phase_surrogate(&series(noise(15, 1)), 1), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn self_as_surrogate_gives_zero_rmse() {
        let s = series(noise(500, 4));
        let r = lt_rmse_against(&s, &[s.clone(), s.clone()], 10.0).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.n_surrogates, 2);
    }

    #[test]
    fn rmse_is_thread_count_independent() {
        let s = series(noise(4096, 8));
        let cfg = LinearityConfig { max_lag: 20.0, n_surrogates: 7 };
        let a = lt_rmse(&s, &cfg, 3).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| lt_rmse(&s, &cfg, 3).unwrap());
        assert_eq!(a, b);
        assert!(a.rmse >= 0.0);
        assert!(a.lags.windows(2).all(|w| w[1] > w[0]) && a.lags[0] == 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn offset_invariance_and_scale_linearity(seed in 0u64..1000, c in -100.0f64..100.0, a in 0.01f64..100.0) {
            let v: Vec<f64> = noise(400, seed).iter().map(|x| (x - 50.0) * 100.0).map(|x| x + 0.3 * x * x).collect();
            let base = lt_curve(&series(v.clone()), 10.0).unwrap().values;
            let shifted = lt_curve(&series(v.iter().map(|x| x + c).collect()), 10.0).unwrap().values;
            let scaled = lt_curve(&series(v.iter().map(|x| x * a).collect()), 10.0).unwrap().values;
            let norm = base.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..base.len() {
                prop_assert!((shifted[i] - base[i]).abs() <= 1e-9 * norm);
                prop_assert!((scaled[i] - a * base[i]).abs() <= 1e-10 * a * norm);
            }
        }
    }
}
