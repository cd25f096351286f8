use gridfreq::series::{segment, to_increments, FrequencySeries, IngestConfig, SegmentedSeries};
use proptest::prelude::*;

fn config(max_gap_steps: u32) -> IngestConfig {
    IngestConfig { max_gap: Some(f64::from(max_gap_steps)), ..IngestConfig::default() }
}

/// On-grid timestamps with small jitter and occasional gaps of a few samples.
fn raw_samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0u64..6, -0.004f64..0.004, 49.9f64..50.1), 1..300).prop_map(|steps| {
        let mut grid = 0u64;
        let mut out = Vec::with_capacity(steps.len());
        for (i, (extra, jitter, f)) in steps.into_iter().enumerate() {
            if i > 0 {
                // mostly contiguous; a few larger holes
                grid += 1 + if extra >= 4 { extra } else { 0 };
            }
            out.push((grid as f64 + jitter, f));
        }
        out
    })
}

fn flatten(s: &SegmentedSeries) -> Vec<(f64, f64)> {
    s.segments.iter().flat_map(|seg| seg.timestamps().zip(seg.values.iter().copied())).collect()
}

fn series(values: Vec<f64>) -> FrequencySeries {
    FrequencySeries::new(values, 0.0, 1.0, "prop").unwrap()
}

proptest! {
    #[test]
    fn resegmenting_is_idempotent(raw in raw_samples(), max_gap in 1u32..5) {
        let cfg = config(max_gap);
        let once = segment(&raw, &cfg).unwrap();
        let flat = flatten(&once);
        prop_assume!(!flat.is_empty());
        let twice = segment(&flat, &cfg).unwrap();
        prop_assert_eq!(twice.segments.len(), once.segments.len());
        for (a, b) in once.segments.iter().zip(&twice.segments) {
            prop_assert_eq!(&a.values, &b.values);
            prop_assert_eq!(a.start_epoch, b.start_epoch);
        }
        prop_assert_eq!(twice.isolated_samples, 0);
    }

    #[test]
    fn segmentation_only_partitions(raw in raw_samples(), max_gap in 1u32..5) {
        let s = segment(&raw, &config(max_gap)).unwrap();
        prop_assert_eq!(s.total_len() + s.isolated_samples, raw.len());
        let kept: Vec<f64> = s.pooled_values();
        // retained values appear in input order, unmodified
        let mut it = raw.iter().map(|r| r.1);
        for v in kept {
            prop_assert!(it.any(|x| x == v));
        }
    }

    #[test]
    fn increments_of_increments_are_second_differences(values in prop::collection::vec(49.0f64..51.0, 3..200)) {
        let first = to_increments(&series(values.clone()), 1.0).unwrap();
        let second = to_increments(&series(first.values.clone()), 1.0).unwrap();
        prop_assert_eq!(second.values.len(), values.len() - 2);
        for (k, d2) in second.values.iter().enumerate() {
            let direct = values[k + 2] - 2.0 * values[k + 1] + values[k];
            prop_assert!((d2 - direct).abs() <= 1e-12, "k {}: {} vs {}", k, d2, direct);
        }
    }

    #[test]
    fn increments_telescope(values in prop::collection::vec(-1e3f64..1e3, 2..500), lag in 1usize..4) {
        prop_assume!(values.len() > lag);
        let inc = to_increments(&series(values.clone()), lag as f64).unwrap();
        prop_assert_eq!(inc.values.len(), values.len() - lag);
        // each residue class mod lag telescopes separately
        for r in 0..lag {
            let sum: f64 = inc.values.iter().skip(r).step_by(lag).sum();
            let last = r + lag * ((values.len() - 1 - r) / lag);
            let bound = 1e-12 * values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!((sum - (values[last] - values[r])).abs() <= bound);
        }
    }

    #[test]
    fn negated_series_negates_increments(values in prop::collection::vec(-10.0f64..10.0, 2..100)) {
        let a = to_increments(&series(values.clone()), 1.0).unwrap();
        let b = to_increments(&series(values.iter().map(|v| -v).collect()), 1.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert_eq!(*x, -*y);
        }
    }
}

#[test]
fn segmented_increments_never_cross_boundaries() {
    let mut raw: Vec<(f64, f64)> = (0..10).map(|t| (f64::from(t), 50.0)).collect();
    raw.extend((20..30).map(|t| (f64::from(t), 51.0)));
    let s = segment(&raw, &IngestConfig::default()).unwrap();
    assert_eq!(s.segments.len(), 2);
    let inc = s.increments(1.0).unwrap();
    assert_eq!(inc.values.len(), 18);
    // the one-hertz jump between segments never shows up
    assert!(inc.values.iter().all(|v| *v == 0.0));
}
