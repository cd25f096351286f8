use thiserror::Error;

/// A malformed CSV row encountered during ingestion.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RowError {
    /// 1-based line number in the source.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input contains no samples")]
    InputEmpty,

    #[error("{bad_rows} of {total_rows} rows malformed (first at line {}: {})", first.line, first.message)]
    MalformedInput {
        bad_rows: usize,
        total_rows: usize,
        first: RowError,
    },

    #[error("timestamps not strictly increasing at index {index}")]
    InternalOrdering { index: usize },

    #[error("lag {tau} s is not an integer multiple of dt = {dt} s")]
    LagNotAligned { tau: f64, dt: f64 },

    #[error("lag of {lag} samples exceeds usable series length {len}")]
    LagExceedsSeries { lag: usize, len: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponential fit diverged: {reason} (lambda = {lambda}, iterations = {iterations})")]
    FitDiverged {
        reason: &'static str,
        lambda: f64,
        iterations: usize,
    },

    #[error("fewer than two usable window sizes ({usable})")]
    InsufficientScales { usable: usize },

    #[error("unstable discretization: theta*dt = {theta_dt} must be below 2")]
    UnstableDiscretization { theta_dt: f64 },

    #[error("duplicate region label {0:?}")]
    DuplicateLabel(String),

    #[error("every analysis was skipped")]
    ReportEmpty,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name of the error kind, used for skip reasons.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InputEmpty => "InputEmpty",
            Error::MalformedInput { .. } => "MalformedInput",
            Error::InternalOrdering { .. } => "InternalOrderingError",
            Error::LagNotAligned { .. } => "LagNotAligned",
            Error::LagExceedsSeries { .. } => "LagExceedsSeries",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::DegenerateDistribution(_) => "DegenerateDistribution",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::FitDiverged { .. } => "FitDiverged",
            Error::InsufficientScales { .. } => "InsufficientScales",
            Error::UnstableDiscretization { .. } => "UnstableDiscretization",
            Error::DuplicateLabel(_) => "DuplicateLabel",
            Error::ReportEmpty => "ReportEmpty",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
