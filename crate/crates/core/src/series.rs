//! Recorded frequency data: ingestion, gap segmentation and increments.
//!
//! A recording is a list of `(timestamp, frequency)` rows. Missing stretches
//! are never interpolated; the recording is cut into gap-free
//! [`FrequencySeries`] segments instead, and every downstream analysis works
//! per segment.

use std::io::Read;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};

/// Relative tolerance used when checking that a lag is a multiple of `dt`.
const LAG_ALIGN_TOL: f64 = 1e-9;

/// Uniformly sampled frequency values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySeries {
    /// Frequency samples in Hz.
    pub values: Vec<f64>,
    /// Unix time of the first sample, in seconds.
    pub start_epoch: f64,
    /// Sampling interval in seconds.
    pub dt: f64,
    pub region: String,
}

impl FrequencySeries {
    /// Builds a series, enforcing `dt > 0`, finite values and length >= 2.
    pub fn new(values: Vec<f64>, start_epoch: f64, dt: f64, region: impl Into<String>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !start_epoch.is_finite() {
            return Err(Error::InvalidParameter("start_epoch must be finite".into()));
        }
        if values.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
        }
        Ok(Self { values, start_epoch, dt, region: region.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of the last sample.
    pub fn end_epoch(&self) -> f64 {
        self.start_epoch + (self.values.len() - 1) as f64 * self.dt
    }

    /// Timestamps reconstructed from the start epoch and `dt`.
    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.start_epoch + k as f64 * self.dt)
    }

    /// Converts a lag in seconds into a whole number of samples.
    pub fn lag_samples(&self, tau: f64) -> Result<usize> {
        lag_in_samples(tau, self.dt)
    }
}

pub(crate) fn lag_in_samples(tau: f64, dt: f64) -> Result<usize> {
    let ratio = tau / dt;
    let lag = ratio.round();
    if !(tau > 0.0) || !ratio.is_finite() || lag < 1.0 || (ratio - lag).abs() > LAG_ALIGN_TOL * lag.max(1.0) {
        return Err(Error::LagNotAligned { tau, dt });
    }
    Ok(lag as usize)
}

/// A recording split into gap-free segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedSeries {
    pub segments: Vec<FrequencySeries>,
    pub source: String,
    /// Samples discarded during ingestion: duplicate timestamps and
    /// malformed rows.
    pub dropped_samples: usize,
    /// Retained samples with no on-grid neighbour. A single sample cannot
    /// form a series, so these belong to no segment.
    #[serde(default)]
    pub isolated_samples: usize,
    /// Rows that failed to parse. Only present when below the abort threshold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_errors: Vec<RowError>,
}

impl SegmentedSeries {
    /// Wraps a single contiguous series.
    pub fn from_series(series: FrequencySeries, source: impl Into<String>) -> Self {
        Self { segments: vec![series], source: source.into(), dropped_samples: 0, isolated_samples: 0, row_errors: Vec::new() }
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(FrequencySeries::len).sum()
    }

    pub fn longest(&self) -> Option<&FrequencySeries> {
        // first of equally long segments wins
        self.segments.iter().fold(None, |best: Option<&FrequencySeries>, s| match best {
            Some(b) if b.len() >= s.len() => Some(b),
            _ => Some(s),
        })
    }

    /// All samples of all segments, in time order.
    pub fn pooled_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len());
        for s in &self.segments {
            out.extend_from_slice(&s.values);
        }
        out
    }

    pub fn region(&self) -> &str {
        self.segments.first().map(|s| s.region.as_str()).unwrap_or("")
    }

    /// `(first timestamp, last timestamp)` of the recording.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.start_epoch, last.end_epoch()))
    }

    /// Increments at lag `tau`, computed per segment and concatenated.
    ///
    /// Segments not longer than the lag are skipped; increments never span
    /// two segments.
    pub fn increments(&self, tau: f64) -> Result<IncrementSeries> {
        let dt = self.segments.first().ok_or(Error::InputEmpty)?.dt;
        let lag = lag_in_samples(tau, dt)?;
        let mut values = Vec::new();
        let mut used = 0;
        for seg in self.segments.iter().filter(|s| s.len() > lag) {
            values.extend(seg.values[lag..].iter().zip(&seg.values).map(|(b, a)| b - a));
            used += 1;
        }
        if used == 0 {
            let len = self.longest().map_or(0, FrequencySeries::len);
            return Err(Error::LagExceedsSeries { lag, len });
        }
        Ok(IncrementSeries { values, tau, parent_region: self.region().to_string() })
    }
}

/// Frequency increments `f(t + tau) - f(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub values: Vec<f64>,
    /// Lag in seconds.
    pub tau: f64,
    pub parent_region: String,
}

/// Increments of a single contiguous series.
pub fn to_increments(series: &FrequencySeries, tau: f64) -> Result<IncrementSeries> {
    let lag = series.lag_samples(tau)?;
    if lag >= series.len() {
        return Err(Error::LagExceedsSeries { lag, len: series.len() });
    }
    let values = series.values[lag..].iter().zip(&series.values).map(|(b, a)| b - a).collect();
    Ok(IncrementSeries { values, tau, parent_region: series.region.clone() })
}

/// Settings for [`ingest_csv`] and [`segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct IngestConfig {
    /// Nominal sampling interval in seconds.
    pub dt: f64,
    /// Largest tolerated spacing between consecutive samples, in seconds.
    /// Defaults to `dt`, i.e. any missing sample splits the recording.
    pub max_gap: Option<f64>,
    /// Timing jitter accepted as on-grid, as a fraction of `dt`.
    pub jitter: f64,
    /// Fraction of malformed rows above which ingestion aborts.
    pub max_malformed_fraction: f64,
    pub region: String,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { dt: 1.0, max_gap: None, jitter: 0.01, max_malformed_fraction: 0.01, region: String::new() }
    }
}

impl IngestConfig {
    pub fn effective_max_gap(&self) -> f64 {
        self.max_gap.unwrap_or(self.dt)
    }
}

/// Parses a timestamp given either as Unix seconds or as ISO-8601 UTC.
pub fn parse_timestamp(field: &str) -> Option<f64> {
    let field = field.trim();
    if let Ok(v) = field.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.fZ", "%Y-%m-%d %H:%M:%S%.fZ"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(field, fmt) {
            let utc = naive.and_utc();
            return Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) * 1e-9);
        }
    }
    None
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<(f64, f64), String> {
    if record.len() < 2 {
        return Err(format!("expected 2 columns, found {}", record.len()));
    }
    let t = parse_timestamp(&record[0]).ok_or_else(|| format!("bad timestamp {:?}", &record[0]))?;
    let f: f64 = record[1].trim().parse().map_err(|_| format!("bad frequency {:?}", &record[1]))?;
    if !f.is_finite() {
        return Err(format!("non-finite frequency {:?}", &record[1]));
    }
    Ok((t, f))
}

/// Reads a `timestamp,frequency` CSV and cuts it into gap-free segments.
///
/// A header row is optional and `#` lines are comments. Malformed rows are
/// dropped and collected in `row_errors` unless they exceed
/// `max_malformed_fraction` of all rows, in which case ingestion fails.
pub fn ingest_csv<R: Read>(source: R, config: &IngestConfig) -> Result<SegmentedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut total = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(Error::Io(std::io::Error::other(e.to_string())));
                }
                total += 1;
                errors.push(RowError { line: i + 1, message: e.to_string() });
                continue;
            }
        };
        if record.iter().all(str::is_empty) {
            continue;
        }
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        match parse_row(&record) {
            Ok(row) => {
                total += 1;
                rows.push(row);
            }
            // a first row that parses as neither column is taken as the header
            Err(_) if total == 0 && errors.is_empty() && parse_timestamp(&record[0]).is_none() => {}
            Err(message) => {
                total += 1;
                errors.push(RowError { line, message });
            }
        }
    }

    if total == 0 {
        return Err(Error::InputEmpty);
    }
    if errors.len() as f64 > config.max_malformed_fraction * total as f64 {
        return Err(Error::MalformedInput { bad_rows: errors.len(), total_rows: total, first: errors[0].clone() });
    }
    if rows.is_empty() {
        return Err(Error::InputEmpty);
    }

    // stable: among equal timestamps the first occurrence in the file stays first
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = config.jitter * config.dt;
    let mut deduped: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    let mut duplicates = 0;
    for row in rows {
        match deduped.last() {
            Some(prev) if row.0 - prev.0 <= tol => duplicates += 1,
            _ => deduped.push(row),
        }
    }

    let mut segmented = segment(&deduped, config)?;
    segmented.dropped_samples += duplicates + errors.len();
    segmented.row_errors = errors;
    Ok(segmented)
}

/// Splits strictly increasing timestamped samples into gap-free segments.
///
/// Consecutive samples stay together when their spacing is `dt` within the
/// jitter tolerance. A spacing that is an on-grid multiple of `dt` and no
/// larger than `max_gap` is tolerated without interpolation; anything else
/// starts a new segment. A run of a single sample cannot form a series and
/// is counted in `isolated_samples`.
pub fn segment(raw: &[(f64, f64)], config: &IngestConfig) -> Result<SegmentedSeries> {
    let dt = config.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let max_gap = config.effective_max_gap();
    if !(max_gap >= dt * (1.0 - config.jitter)) {
        return Err(Error::InvalidParameter(format!("max_gap {max_gap} is smaller than dt {dt}")));
    }
    if raw.is_empty() {
        return Err(Error::InputEmpty);
    }
    if let Some(i) = raw.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InternalOrdering { index: i + 1 });
    }
    let tol = config.jitter * dt;

    let mut segments = Vec::new();
    let mut isolated = 0;
    let mut start = 0;
    let mut flush = |lo: usize, hi: usize, isolated: &mut usize| {
        if hi - lo >= 2 {
            let values = raw[lo..hi].iter().map(|r| r.1).collect();
            segments.push(FrequencySeries { values, start_epoch: raw[lo].0, dt, region: config.region.clone() });
        } else {
            *isolated += hi - lo;
        }
    };
    for i in 1..raw.len() {
        let gap = raw[i].0 - raw[i - 1].0;
        let steps = (gap / dt).round();
        let on_grid = steps >= 1.0 && (gap - steps * dt).abs() <= tol;
        let keep = on_grid && (steps == 1.0 || gap <= max_gap + tol);
        if !keep {
            flush(start, i, &mut isolated);
            start = i;
        }
    }
    flush(start, raw.len(), &mut isolated);

    Ok(SegmentedSeries {
        segments,
        source: config.region.clone(),
        dropped_samples: 0,
        isolated_samples: isolated,
        row_errors: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> IngestConfig {
        IngestConfig::default()
    }

    #[test]
    fn contiguous_rows_form_one_segment() {
        let csv = "0,50.0\n1,50.01\n2,49.99\n";
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].values, vec![50.0, 50.01, 49.99]);
        assert_eq!(s.dropped_samples, 0);
    }

    #[test]
    fn gap_splits_segments() {
        let csv = "0,50.0\n1,50.0\n5,50.1\n6,50.2\n";
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        let lens: Vec<_> = s.segments.iter().map(FrequencySeries::len).collect();
        assert_eq!(lens, vec![2, 2]);
        assert_eq!(s.segments[1].start_epoch, 5.0);
    }

    #[test]
    fn mostly_non_numeric_is_malformed() {
        let csv = "0,50.0\n1,abc\n2,50.1\n3,xyz\n";
        match ingest_csv(csv.as_bytes(), &cfg()) {
            Err(Error::MalformedInput { bad_rows: 2, total_rows: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input() {
        assert!(matches!(ingest_csv("".as_bytes(), &cfg()), Err(Error::InputEmpty)));
        assert!(matches!(ingest_csv("# only a comment\n".as_bytes(), &cfg()), Err(Error::InputEmpty)));
        assert!(matches!(ingest_csv("time,freq\n".as_bytes(), &cfg()), Err(Error::InputEmpty)));
    }

    #[test]
    fn header_comments_and_iso_timestamps() {
        let csv = "# recorder export\ntimestamp,frequency\n2022-10-30T00:00:00Z,50.0\n2022-10-30T00:00:01Z,50.01\n2022-10-30 00:00:02,50.02\n";
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].len(), 3);
        assert_eq!(s.segments[0].start_epoch, 1_667_088_000.0);
    }

    #[test]
    fn isolated_bad_row_is_collected_not_fatal() {
        let mut csv = String::new();
        for t in 0..200 {
            csv.push_str(&format!("{t},50.0\n"));
        }
        csv.push_str("200,nan\n");
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert_eq!(s.row_errors.len(), 1);
        assert_eq!(s.row_errors[0].line, 201);
        assert_eq!(s.dropped_samples, 1);
        assert_eq!(s.total_len(), 200);
    }

    #[test]
    fn unsorted_rows_are_sorted_and_duplicates_dropped() {
        let csv = "2,50.2\n0,50.0\n1,50.1\n1,99.0\n";
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert_eq!(s.segments[0].values, vec![50.0, 50.1, 50.2]);
        assert_eq!(s.dropped_samples, 1);
    }

    #[test]
    fn gapless_hour() {
        let raw: Vec<_> = (0..3600).map(|t| (t as f64, 50.0)).collect();
        let s = segment(&raw, &cfg()).unwrap();
        assert_eq!(s.segments.len(), 1);
        assert_eq!(s.segments[0].len(), 3600);
    }

    #[test]
    fn ten_second_hole() {
        let raw: Vec<_> = (0..3600).filter(|t| !(1000..1010).contains(t)).map(|t| (t as f64, 50.0)).collect();
        let s = segment(&raw, &cfg()).unwrap();
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.total_len(), 3590);
    }

    #[test]
    fn identical_timestamps_keep_first() {
        let csv: String = (0..7).map(|k| format!("100,{}\n", 50.0 + k as f64)).collect();
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert!(s.segments.is_empty());
        assert_eq!(s.dropped_samples, 6);
        assert_eq!(s.isolated_samples, 1);
    }

    #[test]
    fn identical_timestamps_dedup_count() {
        let mut csv: String = (0..5).map(|k| format!("100,{}\n", 50.0 + k as f64)).collect();
        csv.push_str("101,50.5\n");
        let s = ingest_csv(csv.as_bytes(), &cfg()).unwrap();
        assert_eq!(s.segments[0].values, vec![50.0, 50.5]);
        assert_eq!(s.dropped_samples, 4);
    }

    #[test]
    fn unsorted_segment_input_rejected() {
        let raw = [(0.0, 50.0), (2.0, 50.0), (1.0, 50.0)];
        assert!(matches!(segment(&raw, &cfg()), Err(Error::InternalOrdering { index: 2 })));
    }

    #[test]
    fn jitter_and_tolerated_gaps() {
        let raw = [(0.0, 1.0), (1.004, 2.0), (2.0, 3.0), (4.0, 4.0), (5.0, 5.0), (6.5, 6.0), (7.5, 7.0)];
        let strict = segment(&raw, &cfg()).unwrap();
        let lens: Vec<_> = strict.segments.iter().map(FrequencySeries::len).collect();
        assert_eq!(lens, vec![3, 2, 2]);
        let loose = segment(&raw, &IngestConfig { max_gap: Some(2.0), ..cfg() }).unwrap();
        let lens: Vec<_> = loose.segments.iter().map(FrequencySeries::len).collect();
        // the off-grid 1.5 s spacing still splits
        assert_eq!(lens, vec![5, 2]);
    }

    #[test]
    fn increments_by_direct_subtraction() {
        let s = FrequencySeries::new(vec![50.00, 50.02, 49.99], 0.0, 1.0, "x").unwrap();
        let inc = to_increments(&s, 1.0).unwrap();
        assert_eq!(inc.values.len(), 2);
        assert!((inc.values[0] - 0.02).abs() < 1e-12);
        assert!((inc.values[1] + 0.03).abs() < 1e-12);
    }

    #[test]
    fn constant_series_zero_increments() {
        let s = FrequencySeries::new(vec![50.0; 10], 0.0, 1.0, "x").unwrap();
        let inc = to_increments(&s, 2.0).unwrap();
        assert_eq!(inc.values, vec![0.0; 8]);
    }

    #[test]
    fn increment_errors() {
        let s = FrequencySeries::new(vec![50.0; 10], 0.0, 1.0, "x").unwrap();
        assert!(matches!(to_increments(&s, 1.5), Err(Error::LagNotAligned { .. })));
        assert!(matches!(to_increments(&s, 0.0), Err(Error::LagNotAligned { .. })));
        assert!(matches!(to_increments(&s, 10.0), Err(Error::LagExceedsSeries { lag: 10, len: 10 })));
        let half = FrequencySeries::new(vec![50.0; 10], 0.0, 0.5, "x").unwrap();
        assert_eq!(to_increments(&half, 1.0).unwrap().values.len(), 8);
    }

    #[test]
    fn segmented_increments_skip_short_segments() {
        let raw = [(0.0, 1.0), (1.0, 2.0), (5.0, 0.0), (6.0, 3.0), (7.0, 7.0)];
        let s = segment(&raw, &cfg()).unwrap();
        assert_eq!(s.increments(1.0).unwrap().values, vec![1.0, 3.0, 4.0]);
        assert_eq!(s.increments(2.0).unwrap().values, vec![7.0]);
        assert!(matches!(s.increments(3.0), Err(Error::LagExceedsSeries { .. })));
    }

    #[test]
    fn series_invariants_enforced() {
        assert!(FrequencySeries::new(vec![1.0], 0.0, 1.0, "").is_err());
        assert!(FrequencySeries::new(vec![1.0, f64::NAN], 0.0, 1.0, "").is_err());
        assert!(FrequencySeries::new(vec![1.0, 2.0], 0.0, 0.0, "").is_err());
    }
}
