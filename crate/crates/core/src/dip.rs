//! Hartigan's dip statistic of unimodality.
//!
//! The dip is the sup-norm distance between the empirical CDF and the
//! closest unimodal CDF. It is computed with the greatest-convex-minorant /
//! least-concave-majorant iteration of Hartigan & Hartigan (1985), working
//! on the distinct sample values with their multiplicities so that ties are
//! handled by the ECDF jumps themselves.
//!
//! Counts are used throughout: the ECDF at the k-th distinct value jumps
//! from `c[k]` (left limit) to `c[k + 1]`. The convex minorant is taken over
//! the left-limit points `(v[k], c[k])` and the concave majorant over the
//! value points `(v[k], c[k + 1])`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of bootstrap replicates for [`dip_p_value`].
pub const DEFAULT_BOOTSTRAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    /// Dip statistic in `[1/(2n), 1/4]`.
    pub dip: f64,
    pub n: usize,
    /// Modal interval `[lo, hi]` of the closest unimodal fit (Hz).
    pub modal_interval: [f64; 2],
    /// Bootstrap p-value against the uniform null, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

/// Empirical CDF in count units over the distinct sorted values.
pub(crate) struct Ecdf {
    pub values: Vec<f64>,
    /// `cum[k]` = number of samples strictly below `values[k]`; `cum[K] = n`.
    pub cum: Vec<f64>,
}

impl Ecdf {
    pub fn from_sorted(sorted: &[f64]) -> Self {
        let mut values = Vec::new();
        let mut cum = vec![0.0];
        for (i, &x) in sorted.iter().enumerate() {
            if values.last() != Some(&x) {
                values.push(x);
                cum.push(0.0);
            }
            *cum.last_mut().unwrap() = (i + 1) as f64;
        }
        Self { values, cum }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn lower(&self, k: usize) -> (f64, f64) {
        (self.values[k], self.cum[k])
    }

    #[inline]
    fn upper(&self, k: usize) -> (f64, f64) {
        (self.values[k], self.cum[k + 1])
    }
}

/// `(b - a) x (c - b)`: positive for a counter-clockwise turn at `b`.
#[inline]
fn turn(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0)
}

#[inline]
fn interpolate(a: (f64, f64), b: (f64, f64), x: f64) -> f64 {
    if b.0 == a.0 {
        a.1
    } else {
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }
}

/// Predecessor links of the convex minorants of every prefix of the
/// left-limit points.
fn minorant_links(ecdf: &Ecdf) -> Vec<usize> {
    let k = ecdf.len();
    let mut prev = vec![0; k];
    for i in 1..k {
        let mut j = i - 1;
        while j > 0 && turn(ecdf.lower(prev[j]), ecdf.lower(j), ecdf.lower(i)) <= 0.0 {
            j = prev[j];
        }
        prev[i] = j;
    }
    prev
}

/// Successor links of the concave majorants of every suffix of the value
/// points.
fn majorant_links(ecdf: &Ecdf) -> Vec<usize> {
    let k = ecdf.len();
    let mut next = vec![k - 1; k];
    for i in (0..k.saturating_sub(1)).rev() {
        let mut j = i + 1;
        while j < k - 1 && turn(ecdf.upper(i), ecdf.upper(j), ecdf.upper(next[j])) >= 0.0 {
            j = next[j];
        }
        next[i] = j;
    }
    next
}

/// Dip in count units (twice the sup distance times n) and the final modal
/// index range.
pub(crate) fn dip_counts(ecdf: &Ecdf) -> (f64, usize, usize) {
    let k = ecdf.len();
    let prev = minorant_links(ecdf);
    let next = majorant_links(ecdf);
    let (mut low, mut high) = (0, k - 1);
    let mut dip = 1.0;
    let mut gcm = Vec::new();
    let mut lcm = Vec::new();

    loop {
        gcm.clear();
        let mut v = high;
        gcm.push(v);
        while v > low {
            v = prev[v];
            gcm.push(v);
        }
        debug_assert_eq!(v, low);
        gcm.reverse();

        lcm.clear();
        let mut v = low;
        lcm.push(v);
        while v < high {
            v = next[v];
            lcm.push(v);
        }
        debug_assert_eq!(v, high);

        // largest vertical gap between majorant and minorant, visiting the
        // vertices of both hulls in ascending order
        let (mut gi, mut li) = (0, 0);
        let mut best = f64::NEG_INFINITY;
        let (mut new_low, mut new_high) = (low, high);
        while gi < gcm.len() || li < lcm.len() {
            let g = gcm.get(gi).copied().unwrap_or(usize::MAX);
            let l = lcm.get(li).copied().unwrap_or(usize::MAX);
            let at = g.min(l);
            let x = ecdf.values[at];
            let minorant = if g == at {
                ecdf.cum[at]
            } else {
                interpolate(ecdf.lower(gcm[gi - 1]), ecdf.lower(g), x)
            };
            let majorant = if l == at {
                ecdf.cum[at + 1]
            } else {
                interpolate(ecdf.upper(lcm[li - 1]), ecdf.upper(l), x)
            };
            let gap = majorant - minorant;
            if gap > best {
                best = gap;
                (new_low, new_high) = match (g == at, l == at) {
                    (true, true) => (at, at),
                    // majorant vertex inside minorant segment [gcm[gi-1], g]
                    (false, true) => (gcm[gi - 1], at),
                    // minorant vertex inside majorant segment [lcm[li-1], l]
                    _ => (at, l),
                };
            }
            if g == at {
                gi += 1;
            }
            if l == at {
                li += 1;
            }
        }

        if best <= dip {
            break;
        }

        // fit error of the minorant on [low, new_low) and of the majorant on
        // (new_high, high]; the modal interval itself may carry the jump
        let mut seg = 0;
        for i in low..new_low {
            while gcm[seg + 1] < i {
                seg += 1;
            }
            let m = interpolate(ecdf.lower(gcm[seg]), ecdf.lower(gcm[seg + 1]), ecdf.values[i]);
            dip = dip.max(ecdf.cum[i + 1] - m);
        }
        let mut seg = lcm.len() - 1;
        for i in ((new_high + 1)..=high).rev() {
            while lcm[seg - 1] > i {
                seg -= 1;
            }
            let m = interpolate(ecdf.upper(lcm[seg - 1]), ecdf.upper(lcm[seg]), ecdf.values[i]);
            dip = dip.max(m - ecdf.cum[i]);
        }

        if new_low == low && new_high == high {
            break;
        }
        low = new_low;
        high = new_high;
    }
    (dip, low, high)
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

/// Dip statistic of an unordered sample.
///
/// Defined for any sample with at least two distinct values; a single
/// two-point sample has the maximal dip 1/4.
pub fn dip_statistic(samples: &[f64]) -> Result<DipResult> {
    check_samples(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    dip_sorted(&sorted)
}

/// [`dip_statistic`] for data already sorted ascending.
pub fn dip_sorted(sorted: &[f64]) -> Result<DipResult> {
    check_samples(sorted)?;
    if sorted.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("samples are not sorted".into()));
    }
    let ecdf = Ecdf::from_sorted(sorted);
    if ecdf.len() < 2 {
        return Err(Error::DegenerateDistribution("all samples identical"));
    }
    let n = sorted.len();
    let (counts, low, high) = dip_counts(&ecdf);
    Ok(DipResult {
        dip: counts / (2 * n) as f64,
        n,
        modal_interval: [ecdf.values[low], ecdf.values[high]],
        p_value: None,
    })
}

/// Bootstrap p-value of `dip` against uniform samples of size `n`:
/// the fraction of replicates whose dip is at least as large.
///
/// Replicate `r` draws from its own ChaCha stream, so the result does not
/// depend on how replicates are scheduled across threads.
pub fn dip_p_value(dip: f64, n: usize, replicates: usize, seed: u64) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one replicate".into()));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let exceed: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let unit = Uniform::new(0.0, 1.0).expect("valid range");
            let mut xs: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            dip_sorted(&xs).is_ok_and(|d| d.dip >= dip)
        })
        .collect();
    Ok(exceed.iter().filter(|&&e| e).count() as f64 / replicates as f64)
}

/// Dip statistic with a bootstrap p-value attached.
pub fn dip_test(samples: &[f64], replicates: usize, seed: u64) -> Result<DipResult> {
    let mut result = dip_statistic(samples)?;
    result.p_value = Some(dip_p_value(result.dip, result.n, replicates, seed)?);
    Ok(result)
}
