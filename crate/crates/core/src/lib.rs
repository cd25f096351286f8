//! Stochastic characterization of power-grid frequency recordings.
//!
//! The crate covers the whole battery: ingestion and gap segmentation,
//! moments and kernel densities, the dip statistic of unimodality, increment
//! statistics, the time-reversal linearity test with phase surrogates,
//! autocorrelation with exponential decay fits, detrended fluctuation
//! analysis, synthetic generators used as oracles, and a report layer that
//! ties them together.

pub mod correlation;
pub mod density;
pub mod dfa;
pub mod dip;
pub mod error;
pub mod increments;
pub mod linearity;
pub mod moments;
mod numeric;
pub mod report;
pub mod series;
pub mod synth;

pub use correlation::{acf, fit_exp_decay, AcfResult, ExpDecayFit};
pub use density::{kde, silverman_bandwidth, DensityEstimate};
pub use dfa::{dfa, DfaConfig, DfaResult};
pub use dip::{dip_statistic, dip_test, DipResult};
pub use error::{Error, Result};
pub use increments::{increment_report, IncrementReport};
pub use linearity::{lt_curve, lt_rmse, lt_rmse_against, phase_surrogate, LinearityConfig, LinearityResult, SpectrumRepresentation};
pub use moments::{moments, MomentSummary};
pub use report::{characterize, compare, AnalysisConfig, CharacterizationReport, ComparisonTable, GridSignature, Outcome};
pub use series::{ingest_csv, segment, to_increments, FrequencySeries, IncrementSeries, IngestConfig, SegmentedSeries};
pub use synth::{
    gen_bimodal_mixture, gen_deadband_ou, gen_fbm, gen_fbm_ou, gen_ou, generate, Mixture, ModelConfig, ModelKind,
};
