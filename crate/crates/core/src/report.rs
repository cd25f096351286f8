//! Full characterization battery and cross-dataset comparison.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlation::{acf, fit_exp_decay, ExpDecayFit};
use crate::dfa::{dfa, DfaConfig, DfaResult};
use crate::dip::{dip_statistic, dip_test, DipResult};
use crate::error::{Error, Result};
use crate::increments::{increment_report, IncrementReport};
use crate::linearity::{lt_rmse, LinearityConfig, LinearityResult, MIN_SURROGATE_LEN};
use crate::moments::{moments, MomentSummary};
use crate::series::SegmentedSeries;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Every parameter of the analysis battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub seed: u64,
    /// Sampling interval in seconds.
    pub dt: f64,
    /// Largest tolerated gap in seconds; `dt` when unset.
    pub max_gap: Option<f64>,
    /// Increment lag in seconds.
    pub tau: f64,
    /// KDE bandwidth in Hz; Silverman's rule when unset.
    pub bandwidth: Option<f64>,
    /// Dip bootstrap replicates; zero disables the p-value.
    pub dip_bootstrap: usize,
    pub lt_max_lag: f64,
    pub n_surrogates: usize,
    pub acf_max_lag: f64,
    pub fit_window: f64,
    pub dfa_min_scale: usize,
    pub dfa_max_scale: Option<usize>,
    pub dfa_scales: usize,
    pub dfa_order: usize,
    pub dfa_fit_min: Option<usize>,
    pub dfa_fit_max: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dt: 1.0,
            max_gap: None,
            tau: 1.0,
            bandwidth: None,
            dip_bootstrap: 0,
            lt_max_lag: 60.0,
            n_surrogates: 19,
            acf_max_lag: 3600.0,
            fit_window: 3600.0,
            dfa_min_scale: 5,
            dfa_max_scale: None,
            dfa_scales: 24,
            dfa_order: 1,
            dfa_fit_min: None,
            dfa_fit_max: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidParameter(format!("invalid value '{value}' for '{key}'")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

impl AnalysisConfig {
    /// Names accepted by [`AnalysisConfig::set`].
    pub const KEYS: [&'static str; 16] = [
        "seed",
        "dt",
        "max_gap",
        "tau",
        "bandwidth",
        "dip_bootstrap",
        "lt_max_lag",
        "n_surrogates",
        "acf_max_lag",
        "fit_window",
        "dfa_min_scale",
        "dfa_max_scale",
        "dfa_scales",
        "dfa_order",
        "dfa_fit_min",
        "dfa_fit_max",
    ];

    /// Sets one parameter from its textual form. Dashes in `key` are read
    /// as underscores; `auto` clears optional values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "seed" => self.seed = parse(&key, value)?,
            "dt" => self.dt = parse(&key, value)?,
            "max_gap" => self.max_gap = parse_opt(&key, value)?,
            "tau" => self.tau = parse(&key, value)?,
            "bandwidth" => self.bandwidth = parse_opt(&key, value)?,
            "dip_bootstrap" => self.dip_bootstrap = parse(&key, value)?,
            "lt_max_lag" => self.lt_max_lag = parse(&key, value)?,
            "n_surrogates" => self.n_surrogates = parse(&key, value)?,
            "acf_max_lag" => self.acf_max_lag = parse(&key, value)?,
            "fit_window" => self.fit_window = parse(&key, value)?,
            "dfa_min_scale" => self.dfa_min_scale = parse(&key, value)?,
            "dfa_max_scale" => self.dfa_max_scale = parse_opt(&key, value)?,
            "dfa_scales" => self.dfa_scales = parse(&key, value)?,
            "dfa_order" => self.dfa_order = parse(&key, value)?,
            "dfa_fit_min" => self.dfa_fit_min = parse_opt(&key, value)?,
            "dfa_fit_max" => self.dfa_fit_max = parse_opt(&key, value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Canonical `key=value` listing, sorted by key.
    pub fn canonical(&self) -> String {
        let entries: BTreeMap<&str, String> = [
            ("seed", self.seed.to_string()),
            ("dt", self.dt.to_string()),
            ("max_gap", show(&self.max_gap)),
            ("tau", self.tau.to_string()),
            ("bandwidth", show(&self.bandwidth)),
            ("dip_bootstrap", self.dip_bootstrap.to_string()),
            ("lt_max_lag", self.lt_max_lag.to_string()),
            ("n_surrogates", self.n_surrogates.to_string()),
            ("acf_max_lag", self.acf_max_lag.to_string()),
            ("fit_window", self.fit_window.to_string()),
            ("dfa_min_scale", self.dfa_min_scale.to_string()),
            ("dfa_max_scale", show(&self.dfa_max_scale)),
            ("dfa_scales", self.dfa_scales.to_string()),
            ("dfa_order", self.dfa_order.to_string()),
            ("dfa_fit_min", show(&self.dfa_fit_min)),
            ("dfa_fit_max", show(&self.dfa_fit_max)),
        ]
        .into_iter()
        .collect();
        entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`AnalysisConfig::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn dfa_config(&self) -> DfaConfig {
        let fit_range = match (self.dfa_fit_min, self.dfa_fit_max) {
            (None, None) => None,
            (lo, hi) => Some([lo.unwrap_or(0), hi.unwrap_or(usize::MAX)]),
        };
        DfaConfig {
            windows: None,
            min_scale: self.dfa_min_scale,
            max_scale: self.dfa_max_scale,
            n_scales: self.dfa_scales,
            order: self.dfa_order,
            fit_range,
        }
    }

    pub fn linearity_config(&self) -> LinearityConfig {
        LinearityConfig { max_lag: self.lt_max_lag, n_surrogates: self.n_surrogates }
    }
}

/// Result of one analysis, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok { value: T },
    Skipped { kind: String, reason: String },
}

impl<T> Outcome<T> {
    pub fn value(&self) -> Option<&T> {
        match self {
            Self::Ok { value } => Some(value),
            Self::Skipped { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok { .. })
    }
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(value) => Self::Ok { value },
            Err(e) => Self::Skipped { kind: e.kind().to_string(), reason: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailClass {
    Heavy,
    Gaussian,
    Light,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationClass {
    Persistent,
    Uncorrelated,
    AntiPersistent,
}

/// Half-width of the band around 0.5 within which a Hurst index counts as
/// uncorrelated.
pub const HURST_BAND: f64 = 0.05;

/// Qualitative flags: increment kurtosis against the Gaussian value 3 and
/// the Hurst index against 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSignature {
    pub increment_tails: Option<TailClass>,
    pub correlation: Option<CorrelationClass>,
}

impl GridSignature {
    /// Excess kurtosis within four standard errors `sqrt(24 / n)` of zero
    /// counts as Gaussian.
    pub fn classify_tails(kurtosis: f64, n: usize) -> TailClass {
        let band = 4.0 * (24.0 / n as f64).sqrt();
        let excess = kurtosis - 3.0;
        if excess > band {
            TailClass::Heavy
        } else if excess < -band {
            TailClass::Light
        } else {
            TailClass::Gaussian
        }
    }

    pub fn classify_hurst(hurst: f64) -> CorrelationClass {
        if hurst > 0.5 + HURST_BAND {
            CorrelationClass::Persistent
        } else if hurst < 0.5 - HURST_BAND {
            CorrelationClass::AntiPersistent
        } else {
            CorrelationClass::Uncorrelated
        }
    }

    pub fn from_results(increment: Option<&IncrementReport>, dfa: Option<&DfaResult>) -> Self {
        Self {
            increment_tails: increment.map(|r| Self::classify_tails(r.moments.kurtosis, r.moments.n)),
            correlation: dfa.map(|d| Self::classify_hurst(d.hurst)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub region: String,
    pub source: String,
    /// First and last timestamp (Unix seconds).
    pub span: [f64; 2],
    pub n_samples: usize,
    pub n_segments: usize,
    pub dropped_samples: usize,
    pub moments: Outcome<MomentSummary>,
    pub increment: Outcome<IncrementReport>,
    pub dip: Outcome<DipResult>,
    pub linearity: Outcome<LinearityResult>,
    pub acf_fit: Outcome<ExpDecayFit>,
    pub dfa: Outcome<DfaResult>,
    pub signature: GridSignature,
}

impl CharacterizationReport {
    /// Number of analyses that were skipped.
    pub fn skipped(&self) -> usize {
        [
            self.moments.is_ok(),
            self.increment.is_ok(),
            self.dip.is_ok(),
            self.linearity.is_ok(),
            self.acf_fit.is_ok(),
            self.dfa.is_ok(),
        ]
        .iter()
        .filter(|ok| !**ok)
        .count()
    }
}

fn require_len(got: usize, needed: usize) -> Result<()> {
    if got < needed {
        return Err(Error::TooFewSamples { needed, got });
    }
    Ok(())
}

/// Runs every analysis on `data`. Failing analyses are recorded as skipped;
/// only when all of them fail is the whole report an error.
///
/// Analyses that need a long contiguous record (linearity, ACF, DFA) are
/// skipped with `TooFewSamples` when the longest segment is too short for
/// their lag or scale range.
pub fn characterize(data: &SegmentedSeries, config: &AnalysisConfig) -> Result<CharacterizationReport> {
    let longest = data.longest().ok_or(Error::InputEmpty)?;
    let dt = longest.dt;
    let pooled = data.pooled_values();
    let steps = |seconds: f64| (seconds / dt).round().max(0.0) as usize;

    let moments_outcome: Outcome<MomentSummary> = moments(&pooled).into();
    let increment: Outcome<IncrementReport> = increment_report(data, config.tau, config.bandwidth).into();
    let dip: Outcome<DipResult> = if config.dip_bootstrap > 0 {
        dip_test(&pooled, config.dip_bootstrap, config.seed)
    } else {
        dip_statistic(&pooled)
    }
    .into();
    let linearity: Outcome<LinearityResult> = require_len(longest.len(), (4 * steps(config.lt_max_lag) + 1).max(MIN_SURROGATE_LEN))
        .and_then(|_| lt_rmse(longest, &config.linearity_config(), config.seed))
        .into();
    let acf_fit: Outcome<ExpDecayFit> = require_len(longest.len(), 4 * steps(config.acf_max_lag))
        .and_then(|_| acf(data, config.acf_max_lag))
        .and_then(|a| fit_exp_decay(&a, config.fit_window))
        .into();
    let dfa_cfg = config.dfa_config();
    let dfa_outcome: Outcome<DfaResult> =
        require_len(longest.len(), 4 * (dfa_cfg.min_scale.max(dfa_cfg.order + 2) + 1))
            .and_then(|_| dfa(data, &dfa_cfg))
            .into();

    let signature = GridSignature::from_results(increment.value(), dfa_outcome.value());
    let report = CharacterizationReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config_digest: config.digest(),
        region: data.region().to_string(),
        source: data.source.clone(),
        span: data.span().map_or([0.0, 0.0], |(a, b)| [a, b]),
        n_samples: data.total_len(),
        n_segments: data.segments.len(),
        dropped_samples: data.dropped_samples,
        moments: moments_outcome,
        increment,
        dip,
        linearity,
        acf_fit,
        dfa: dfa_outcome,
        signature,
    };
    if report.skipped() == 6 {
        return Err(Error::ReportEmpty);
    }
    Ok(report)
}

/// Per-dataset summary values; `None` where the analysis was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub region: String,
    pub n_samples: usize,
    pub dip: Option<f64>,
    pub rmse: Option<f64>,
    pub lambda: Option<f64>,
    pub hurst: Option<f64>,
    pub kurtosis: Option<f64>,
    pub increment_kurtosis: Option<f64>,
}

impl ComparisonRow {
    fn from_report(r: &CharacterizationReport) -> Self {
        Self {
            region: r.region.clone(),
            n_samples: r.n_samples,
            dip: r.dip.value().map(|d| d.dip),
            rmse: r.linearity.value().map(|l| l.rmse),
            lambda: r.acf_fit.value().map(|f| f.lambda),
            hurst: r.dfa.value().map(|d| d.hurst),
            kurtosis: r.moments.value().map(|m| m.kurtosis),
            increment_kurtosis: r.increment.value().map(|i| i.moments.kurtosis),
        }
    }

    fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "dip" => self.dip,
            "rmse" => self.rmse,
            "lambda" => self.lambda,
            "hurst" => self.hurst,
            "kurtosis" => self.kurtosis,
            "increment_kurtosis" => self.increment_kurtosis,
            _ => None,
        }
    }
}

pub const RANKED_METRICS: [&str; 6] = ["dip", "rmse", "lambda", "hurst", "kurtosis", "increment_kurtosis"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub region: String,
    pub value: f64,
}

/// Datasets ordered by one metric, largest first; equal values are ordered
/// by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: String,
    pub order: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub schema_version: u32,
    pub rows: Vec<ComparisonRow>,
    pub rankings: Vec<Ranking>,
}

impl ComparisonTable {
    /// One CSV line per dataset; skipped metrics are empty fields.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidParameter(e.to_string());
        w.write_record(["region", "n_samples", "dip", "rmse", "lambda", "hurst", "kurtosis", "increment_kurtosis"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            w.write_record([
                r.region.clone(),
                r.n_samples.to_string(),
                opt(r.dip),
                opt(r.rmse),
                opt(r.lambda),
                opt(r.hurst),
                opt(r.kurtosis),
                opt(r.increment_kurtosis),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Tabulates reports and ranks them on every metric.
pub fn compare(reports: &[CharacterizationReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::InvalidParameter(format!("comparison needs at least two reports, got {}", reports.len())));
    }
    let mut seen = HashSet::new();
    for r in reports {
        if !seen.insert(r.region.as_str()) {
            return Err(Error::DuplicateLabel(r.region.clone()));
        }
    }
    let rows: Vec<ComparisonRow> = reports.iter().map(ComparisonRow::from_report).collect();
    let rankings = RANKED_METRICS
        .iter()
        .map(|&metric| {
            let mut order: Vec<RankEntry> = rows
                .iter()
                .filter_map(|r| r.metric(metric).map(|value| RankEntry { region: r.region.clone(), value }))
                .collect();
            order.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.region.cmp(&b.region)));
            Ranking { metric: metric.to_string(), order }
        })
        .collect();
    Ok(ComparisonTable { schema_version: SCHEMA_VERSION, rows, rankings })
}
