use gridfreq::correlation::{acf, fit_exp_decay};
use gridfreq::dfa::{dfa, DfaConfig};
use gridfreq::linearity::{lt_curve, lt_rmse, LinearityConfig};
use gridfreq::series::{FrequencySeries, SegmentedSeries};
use gridfreq::synth::{gen_fbm, gen_ou, replicate_seed, ModelConfig, ModelKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

fn series(values: Vec<f64>) -> FrequencySeries {
    FrequencySeries::new(values, 0.0, 1.0, "test").unwrap()
}

fn segmented(s: FrequencySeries) -> SegmentedSeries {
    SegmentedSeries::from_series(s, "test")
}

/// AR(1) with unit-variance innovations `sqrt(1 - a) g + sqrt(a) (E - 1)`,
/// Gaussian at `a = 0` and increasingly skewed (time-irreversible) as `a`
/// grows. Both noise streams are drawn for every `a` so paths share them.
fn ar1(phi: f64, skew: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = Exp1.sample(&mut rng);
            x = phi * x + (1.0 - skew).sqrt() * g + skew.sqrt() * (e - 1.0);
            x
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn reversible_ar1_stays_inside_the_lt_error_band() {
    let n = 1_000_000;
    let blocks = 100;
    let max_lag = 60.0;
    let x = ar1(0.9, 0.0, n, 201);
    let whole = lt_curve(&series(x.clone()), max_lag).unwrap();
    // standard error per lag from the spread of block estimates
    let per_block: Vec<Vec<f64>> =
        x.chunks(n / blocks).map(|c| lt_curve(&series(c.to_vec()), max_lag).unwrap().values).collect();
    for (k, v) in whole.values.iter().enumerate() {
        let column: Vec<f64> = per_block.iter().map(|b| b[k]).collect();
        let se = mean_sd(&column).1 / (blocks as f64).sqrt();
        assert!(v.abs() < 3.0 * se, "lag {}: LT {v} se {se}", k + 1);
    }
}

#[test]
fn skewed_innovations_give_nonzero_lt() {
    let lt1: Vec<f64> = (0..100).map(|r| lt_curve(&series(ar1(0.9, 1.0, 100_000, replicate_seed(202, r))), 5.0).unwrap().values[0]).collect();
    let (m, sd) = mean_sd(&lt1);
    assert!(m.abs() > 5.0 * sd / 10.0, "mean {m} sd {sd}");
}

#[test]
fn rmse_grows_with_irreversibility() {
    let grid = [0.0, 0.1, 0.5, 1.0];
    let config = LinearityConfig { max_lag: 20.0, n_surrogates: 19 };
    let medians: Vec<f64> = grid
        .iter()
        .map(|&a| {
            let mut rmse: Vec<f64> = (0..50)
                .map(|r| {
                    let seed = replicate_seed(203, r);
                    lt_rmse(&series(ar1(0.9, a, 1 << 14, seed)), &config, seed).unwrap().rmse
                })
                .collect();
            rmse.sort_by(f64::total_cmp);
            0.5 * (rmse[24] + rmse[25])
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
    assert!(medians[3] > 2.0 * medians[0], "{medians:?}");
}

#[test]
fn white_noise_acf_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    let x: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = acf(&segmented(series(x)), 100.0).unwrap();
    assert_eq!(a.acf[0], 1.0);
    let worst = a.acf[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn ou_acf_follows_exponential() {
    let theta = 0.01;
    let cfg = ModelConfig { theta, n: 1_000_000, seed: 205, ..ModelConfig::default() };
    let a = acf(&segmented(gen_ou(&cfg).unwrap()), 600.0).unwrap();
    let worst = a.lags.iter().zip(&a.acf).map(|(t, v)| (v - (-theta * t).exp()).abs()).fold(0.0f64, f64::max);
    assert!(worst < 0.02, "{worst}");
    let fit = fit_exp_decay(&a, 600.0).unwrap();
    assert!((fit.lambda / theta - 1.0).abs() < 0.1, "{}", fit.lambda);
}

fn fbm_dfa(h: f64, seed: u64) -> f64 {
    let cfg = ModelConfig { kind: ModelKind::Fbm, hurst_h: h, n: 1 << 17, seed, ..ModelConfig::default() };
    dfa(&segmented(gen_fbm(&cfg).unwrap()), &DfaConfig::default()).unwrap().slope
}

#[test]
fn dfa_recovers_fbm_exponent() {
    let slope = fbm_dfa(0.7, 206);
    assert!((1.65..=1.75).contains(&slope), "{slope}");
    assert!((0.65..=0.75).contains(&(slope - 1.0)));
}

#[test]
fn dfa_of_brownian_motion() {
    let slope = fbm_dfa(0.5, 207);
    assert!((slope - 1.5).abs() < 0.05, "{slope}");
}
