//! Sample moments of a distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, CompensatedSum};

/// Population-normalized moments. Kurtosis is non-excess (Gaussian = 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl MomentSummary {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mean, variance, skewness `m3 / m2^(3/2)` and kurtosis `m4 / m2^2`.
///
/// Central sums are accumulated with compensated summation around the
/// refined mean, and the residual offset of that mean is folded back in
/// analytically, so near-symmetric samples with a large offset (50 Hz data)
/// keep their small odd moments.
pub fn moments(samples: &[f64]) -> Result<MomentSummary> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
    }
    let center = mean(samples);
    let (mut s1, mut s2, mut s3, mut s4) =
        (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    for &x in samples {
        let d = x - center;
        let d2 = d * d;
        s1.add(d);
        s2.add(d2);
        s3.add(d2 * d);
        s4.add(d2 * d2);
    }
    let nf = n as f64;
    let (a1, a2, a3, a4) = (s1.value() / nf, s2.value() / nf, s3.value() / nf, s4.value() / nf);
    // shift raw moments about `center` to the exact sample mean `center + a1`
    let m2 = a2 - a1 * a1;
    let m3 = a3 - 3.0 * a1 * a2 + 2.0 * a1 * a1 * a1;
    let m4 = a4 - 4.0 * a1 * a3 + 6.0 * a1 * a1 * a2 - 3.0 * a1 * a1 * a1 * a1;
    if !(m2 > 0.0) {
        return Err(Error::DegenerateDistribution("zero variance"));
    }
    Ok(MomentSummary {
        n,
        mean: center + a1,
        variance: m2,
        skewness: m3 / (m2 * m2.sqrt()),
        kurtosis: m4 / (m2 * m2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_point_symmetric() {
        let m = moments(&[-1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.n, 4);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 1.0);
        assert_eq!(m.skewness, 0.0);
        assert_eq!(m.kurtosis, 1.0);
    }

    #[test]
    fn standard_normal_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = moments(&xs).unwrap();
        assert!(m.skewness.abs() <= 0.02, "{m:?}");
        assert!((2.95..=3.05).contains(&m.kurtosis), "{m:?}");
    }

    #[test]
    fn errors() {
        assert!(matches!(moments(&[1.0, 2.0, 3.0]), Err(Error::TooFewSamples { needed: 4, got: 3 })));
        assert!(matches!(moments(&[50.0; 8]), Err(Error::DegenerateDistribution(_))));
    }

    fn sample_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, 4..200)
            .prop_filter("needs spread", |v| v.iter().any(|x| (x - v[0]).abs() > 1e-3))
    }

    fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(scale)
    }

    proptest! {
        #[test]
        fn translation_equivariant(xs in sample_vec(), c in -1e3..1e3f64) {
            let a = moments(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = moments(&shifted).unwrap();
            prop_assert!(close(b.mean, a.mean + c, 1e-10, 1e-3 + c.abs()));
            prop_assert!(close(b.variance, a.variance, 1e-10, 0.0));
            prop_assert!(close(b.skewness, a.skewness, 1e-10, 1e-4));
            prop_assert!(close(b.kurtosis, a.kurtosis, 1e-10, 0.0));
        }

        #[test]
        fn scale_equivariant(xs in sample_vec(), a in 1e-3..1e3f64) {
            let m = moments(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * a).collect();
            let s = moments(&scaled).unwrap();
            prop_assert!(close(s.variance, m.variance * a * a, 1e-10, 0.0));
            prop_assert!(close(s.skewness, m.skewness, 1e-10, 1e-4));
            prop_assert!(close(s.kurtosis, m.kurtosis, 1e-10, 0.0));
        }

        #[test]
        fn pearson_inequality(xs in sample_vec()) {
            let m = moments(&xs).unwrap();
            prop_assert!(m.variance >= 0.0);
            prop_assert!(m.kurtosis >= 1.0 + m.skewness * m.skewness - 1e-12);
        }
    }
}
