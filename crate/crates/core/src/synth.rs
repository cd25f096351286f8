//! Synthetic trajectories used as benchmarks and as estimator oracles.
//!
//! All generators are deterministic functions of their [`ModelConfig`]: the
//! seed initializes a ChaCha8 stream and draws are consumed in a fixed
//! order. The OU, deadband-OU and fBm-OU (at `H = 0.5`) generators share the
//! same integrator and draw order, so they produce identical paths where
//! their models coincide.

use rand::distr::weighted::WeightedIndex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::FrequencySeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ou,
    Fbm,
    FbmOu,
    DeadbandOu,
    BimodalMixture,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ou => "ou",
            Self::Fbm => "fbm",
            Self::FbmOu => "fbm_ou",
            Self::DeadbandOu => "deadband_ou",
            Self::BimodalMixture => "bimodal_mixture",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ou" => Ok(Self::Ou),
            "fbm" => Ok(Self::Fbm),
            "fbm_ou" => Ok(Self::FbmOu),
            "deadband_ou" | "deadband" => Ok(Self::DeadbandOu),
            "bimodal_mixture" | "mixture" => Ok(Self::BimodalMixture),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Gaussian mixture components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    /// Component means in Hz.
    pub centers: Vec<f64>,
    pub weights: Vec<f64>,
    /// Component standard deviations in Hz.
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Damping in 1/s.
    pub theta: f64,
    /// Mean level in Hz.
    pub mu: f64,
    /// Noise amplitude: Hz s^-1/2 for white noise, Hz s^-H for fractional.
    pub sigma: f64,
    pub hurst_h: f64,
    /// Half-width of the deadband around `mu`, in Hz.
    pub deadband_halfwidth: f64,
    pub mixture: Option<Mixture>,
    pub n: usize,
    /// Sampling interval in seconds.
    pub dt: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Ou,
            theta: 0.01,
            mu: 50.0,
            sigma: 0.002,
            hurst_h: 0.5,
            deadband_halfwidth: 0.0,
            mixture: None,
            n: 86_400,
            dt: 1.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Checks the parameters used by `self.kind`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n });
        }
        if !self.mu.is_finite() {
            return bad("mu must be finite".into());
        }
        if self.kind != ModelKind::BimodalMixture && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if matches!(self.kind, ModelKind::Ou | ModelKind::FbmOu | ModelKind::DeadbandOu) {
            if !(self.theta > 0.0 && self.theta.is_finite()) {
                return bad(format!("theta must be positive, got {}", self.theta));
            }
            if self.theta * self.dt >= 2.0 {
                return Err(Error::UnstableDiscretization { theta_dt: self.theta * self.dt });
            }
        }
        if matches!(self.kind, ModelKind::Fbm | ModelKind::FbmOu) && !(self.hurst_h > 0.0 && self.hurst_h < 1.0) {
            return bad(format!("hurst_h must lie in (0, 1), got {}", self.hurst_h));
        }
        if self.kind == ModelKind::DeadbandOu && !(self.deadband_halfwidth >= 0.0 && self.deadband_halfwidth.is_finite()) {
            return bad(format!("deadband half-width must be non-negative, got {}", self.deadband_halfwidth));
        }
        if self.kind == ModelKind::BimodalMixture {
            let Some(m) = &self.mixture else {
                return bad("mixture components are required".into());
            };
            if m.centers.is_empty() || m.centers.len() != m.weights.len() || m.centers.len() != m.widths.len() {
                return bad("mixture needs equally many centers, weights and widths (at least one)".into());
            }
            if m.weights.iter().any(|w| !(*w >= 0.0)) || (m.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("mixture weights must be non-negative and sum to 1".into());
            }
            if m.widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) || m.centers.iter().any(|c| !c.is_finite()) {
                return bad("mixture widths must be positive and centers finite".into());
            }
        }
        Ok(())
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidParameter(format!(
                "generator for '{}' called with kind '{}'",
                kind.name(),
                self.kind.name()
            )));
        }
        self.validate()
    }

    fn series(&self, values: Vec<f64>) -> Result<FrequencySeries> {
        FrequencySeries::new(values, 0.0, self.dt, format!("synthetic-{}", self.kind.name()))
    }
}

/// Seed of replicate `index` of an ensemble started from `seed`.
///
/// Each replicate reads its own ChaCha stream, so derived seeds do not
/// depend on the order in which replicates are evaluated.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Euler scheme `x += drift(x - mu) dt + noise[i]`, started at `x0`.
fn integrate(x0: f64, mu: f64, dt: f64, noise: impl Iterator<Item = f64>, n: usize, drift: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    out.push(x);
    for dw in noise.take(n - 1) {
        x = x + drift(x - mu) * dt + dw;
        out.push(x);
    }
    out
}

fn white_noise_path(config: &ModelConfig, drift: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sd = (config.sigma * config.sigma / (2.0 * config.theta)).sqrt();
    let x0 = config.mu + sd * normal(&mut rng);
    let step = config.sigma * config.dt.sqrt();
    let noise = std::iter::repeat_with(move || step * normal(&mut rng));
    integrate(x0, config.mu, config.dt, noise, config.n, drift)
}

/// Ornstein-Uhlenbeck path `df = -theta (f - mu) dt + sigma dW` by
/// Euler-Maruyama, started from the stationary law `N(mu, sigma^2 / 2 theta)`.
pub fn gen_ou(config: &ModelConfig) -> Result<FrequencySeries> {
    config.expect_kind(ModelKind::Ou)?;
    let theta = config.theta;
    config.series(white_noise_path(config, |e| -theta * e))
}

/// OU path whose restoring force vanishes within `deadband_halfwidth` of `mu`
/// and acts on the distance to the band edge outside it.
pub fn gen_deadband_ou(config: &ModelConfig) -> Result<FrequencySeries> {
    config.expect_kind(ModelKind::DeadbandOu)?;
    let (theta, d) = (config.theta, config.deadband_halfwidth);
    let drift = move |e: f64| if e.abs() <= d && d > 0.0 { 0.0 } else { -theta * (e - d * e.signum()) };
    config.series(white_noise_path(config, drift))
}

/// Autocovariance of unit fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let p = 2.0 * h;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

/// Unit-variance fGn by circulant embedding; `None` if the embedding is not
/// numerically non-negative definite.
fn fgn_davies_harte(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let m = n.next_power_of_two().max(2);
    let size = 2 * m;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| Complex64::new(fgn_autocovariance(h, if j <= m { j } else { size - j }), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let largest = row.iter().fold(0.0f64, |a, c| a.max(c.re));
    let mut eig = Vec::with_capacity(m + 1);
    for c in &row[..=m] {
        if c.re < -1e-10 * largest {
            return None;
        }
        eig.push(c.re.max(0.0));
    }

    let mut w = vec![Complex64::new(0.0, 0.0); size];
    w[0] = Complex64::new(eig[0].sqrt() * normal(rng), 0.0);
    for k in 1..m {
        let s = (eig[k] / 2.0).sqrt();
        let c = Complex64::new(s * normal(rng), s * normal(rng));
        w[k] = c;
        w[size - k] = c.conj();
    }
    w[m] = Complex64::new(eig[m].sqrt() * normal(rng), 0.0);
    fft.process(&mut w);
    let scale = 1.0 / (size as f64).sqrt();
    Some(w[..n].iter().map(|c| c.re * scale).collect())
}

/// Unit-variance fGn by Hosking's (Durbin-Levinson) recursion, O(n^2).
pub fn fgn_hosking(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(h, k)).collect();
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = gamma[0];
    out.push(v.sqrt() * normal(rng));
    for t in 1..n {
        // phi holds the order-(t-1) prediction coefficients
        let num = gamma[t] - phi.iter().zip(gamma[1..t].iter().rev()).map(|(p, g)| p * g).sum::<f64>();
        let k = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 0..phi.len() {
            phi[j] = prev[j] - k * prev[prev.len() - 1 - j];
        }
        phi.push(k);
        v *= 1.0 - k * k;
        let mean: f64 = phi.iter().zip(out.iter().rev()).map(|(p, x)| p * x).sum();
        out.push(mean + v.max(0.0).sqrt() * normal(rng));
    }
    out
}

/// `n` samples of unit-variance fractional Gaussian noise.
///
/// Davies-Harte embedding of size twice the next power of two, truncated to
/// `n`; falls back to Hosking's recursion if the embedding fails.
pub fn fgn(h: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    match fgn_davies_harte(h, n, rng) {
        Some(x) => x,
        None => {
            eprintln!("warning: circulant embedding failed for H = {h}; using Hosking recursion");
            fgn_hosking(h, n, rng)
        }
    }
}

/// Fractional Brownian motion `mu + B_H(t)` with `B_H(0) = 0` and
/// `Var B_H(t) = sigma^2 t^(2H)`.
pub fn gen_fbm(config: &ModelConfig) -> Result<FrequencySeries> {
    config.expect_kind(ModelKind::Fbm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.sigma * config.dt.powf(config.hurst_h);
    let mut x = config.mu;
    let mut values = Vec::with_capacity(config.n);
    values.push(x);
    for z in fgn(config.hurst_h, config.n - 1, &mut rng) {
        x += scale * z;
        values.push(x);
    }
    config.series(values)
}

/// Stationary variance of the fractional OU process,
/// `sigma^2 theta^(-2H) H Gamma(2H)`.
pub fn fbm_ou_stationary_variance(theta: f64, sigma: f64, h: f64) -> f64 {
    sigma * sigma * theta.powf(-2.0 * h) * h * libm::tgamma(2.0 * h)
}

/// Euler scheme for `df = -theta (f - mu) dt + sigma dB_H`.
///
/// At `H = 0.5` this is exactly [`gen_ou`] with the same seed.
pub fn gen_fbm_ou(config: &ModelConfig) -> Result<FrequencySeries> {
    config.expect_kind(ModelKind::FbmOu)?;
    let theta = config.theta;
    if config.hurst_h == 0.5 {
        return config.series(white_noise_path(config, |e| -theta * e));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sd = fbm_ou_stationary_variance(theta, config.sigma, config.hurst_h).sqrt();
    let x0 = config.mu + sd * normal(&mut rng);
    let scale = config.sigma * config.dt.powf(config.hurst_h);
    let noise = fgn(config.hurst_h, config.n - 1, &mut rng).into_iter().map(|z| scale * z);
    config.series(integrate(x0, config.mu, config.dt, noise, config.n, |e| -theta * e))
}

/// Independent draws from a Gaussian mixture.
pub fn gen_bimodal_mixture(config: &ModelConfig) -> Result<Vec<f64>> {
    config.expect_kind(ModelKind::BimodalMixture)?;
    let m = config.mixture.as_ref().expect("validated");
    let pick = WeightedIndex::new(&m.weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..config.n)
        .map(|_| {
            let c = pick.sample(&mut rng);
            m.centers[c] + m.widths[c] * normal(&mut rng)
        })
        .collect())
}

/// Runs the generator selected by `config.kind`. Mixture draws are laid out
/// at spacing `dt` as if they were a series.
pub fn generate(config: &ModelConfig) -> Result<FrequencySeries> {
    match config.kind {
        ModelKind::Ou => gen_ou(config),
        ModelKind::Fbm => gen_fbm(config),
        ModelKind::FbmOu => gen_fbm_ou(config),
        ModelKind::DeadbandOu => gen_deadband_ou(config),
        ModelKind::BimodalMixture => config.series(gen_bimodal_mixture(config)?),
    }
}

/// `count` replicates of `config`, replicate `r` seeded with
/// [`replicate_seed`]`(config.seed, r)`; generated in parallel.
pub fn ensemble(config: &ModelConfig, count: usize) -> Result<Vec<FrequencySeries>> {
    (0..count as u64)
        .into_par_iter()
        .map(|r| generate(&ModelConfig { seed: replicate_seed(config.seed, r), ..config.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ModelKind) -> ModelConfig {
        ModelConfig { kind, n: 4096, seed: 9, ..Default::default() }
    }

    #[test]
    fn deterministic() {
        for kind in [ModelKind::Ou, ModelKind::Fbm, ModelKind::FbmOu, ModelKind::DeadbandOu] {
            let c = ModelConfig { hurst_h: 0.7, deadband_halfwidth: 0.01, ..cfg(kind) };
            assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
            let other = ModelConfig { seed: 10, ..c.clone() };
            assert_ne!(generate(&c).unwrap(), generate(&other).unwrap());
        }
    }

    #[test]
    fn identity_cases() {
        let ou = gen_ou(&cfg(ModelKind::Ou)).unwrap();
        let db = gen_deadband_ou(&cfg(ModelKind::DeadbandOu)).unwrap();
        assert_eq!(ou.values, db.values);
        let fou = gen_fbm_ou(&ModelConfig { hurst_h: 0.5, ..cfg(ModelKind::FbmOu) }).unwrap();
        assert_eq!(ou.values, fou.values);
    }

    #[test]
    fn unstable_discretization() {
        let c = ModelConfig { theta: 2.5, ..cfg(ModelKind::Ou) };
        assert!(matches!(gen_ou(&c), Err(Error::UnstableDiscretization { .. })));
    }

    #[test]
    fn validation() {
        assert!(gen_ou(&cfg(ModelKind::Fbm)).is_err());
        assert!(gen_fbm(&ModelConfig { hurst_h: 1.0, ..cfg(ModelKind::Fbm) }).is_err());
        assert!(gen_deadband_ou(&ModelConfig { deadband_halfwidth: -1.0, ..cfg(ModelKind::DeadbandOu) }).is_err());
        let bad = Mixture { centers: vec![0.0, 1.0], weights: vec![0.5, 0.6], widths: vec![1.0, 1.0] };
        assert!(gen_bimodal_mixture(&ModelConfig { mixture: Some(bad), ..cfg(ModelKind::BimodalMixture) }).is_err());
        assert!(gen_bimodal_mixture(&cfg(ModelKind::BimodalMixture)).is_err());
    }

    #[test]
    fn fbm_starts_at_mu() {
        let c = ModelConfig { hurst_h: 0.3, n: 1000, ..cfg(ModelKind::Fbm) };
        let s = gen_fbm(&c).unwrap();
        assert_eq!(s.values[0], 50.0);
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn hosking_and_embedding_share_covariance() {
        // lag-1 correlation of unit fGn, averaged over replicates
        let h = 0.8;
        let expected = fgn_autocovariance(h, 1);
        for method in 0..2 {
            let (mut c0, mut c1) = (0.0, 0.0);
            for r in 0..200u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(r);
                let x = if method == 0 { fgn(h, 300, &mut rng) } else { fgn_hosking(h, 300, &mut rng) };
                c0 += x.iter().map(|v| v * v).sum::<f64>();
                c1 += x.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
            }
            let var = c0 / (200.0 * 300.0);
            let lag1 = c1 / (200.0 * 299.0);
            assert!((var - 1.0).abs() < 0.05, "method {method}: var {var}");
            assert!((lag1 - expected).abs() < 0.05, "method {method}: lag1 {lag1} vs {expected}");
        }
    }

    #[test]
    fn stationary_variance_formula_matches_ou() {
        let v = fbm_ou_stationary_variance(0.01, 0.002, 0.5);
        assert!((v - 0.002f64.powi(2) / 0.02).abs() < 1e-18);
    }

    #[test]
    fn replicate_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100).map(|r| replicate_seed(1, r)).collect();
        assert_eq!(seeds.len(), 100);
        let e = ensemble(&cfg(ModelKind::Ou), 3).unwrap();
        assert_eq!(e[1], generate(&ModelConfig { seed: replicate_seed(9, 1), ..cfg(ModelKind::Ou) }).unwrap());
    }
}
