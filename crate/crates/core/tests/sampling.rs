mod common;

use charquant::charfns::DistSpec;
use charquant::moments::QuadratureConfig;
use charquant::pipeline::{build_quantile, BuiltQuantile, QuantileOptions};
use charquant::sampler::*;
use common::*;
use proptest::prelude::*;

fn stable(alpha: f64, scale: f64) -> BuiltQuantile {
    let opts = QuantileOptions {
        scale,
        ..QuantileOptions::default()
    };
    build_quantile(&DistSpec::Stable { alpha, beta: 0.0 }, store(), &opts, &QuadratureConfig::default()).unwrap()
}

fn gaussian() -> BuiltQuantile {
    build_quantile(&DistSpec::Gaussian { mu: 0.0 }, store(), &QuantileOptions::default(), &QuadratureConfig::default())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn same_seed_same_draws(seed in any::<u64>()) {
        let q = stable(1.5, 1.0).quantile;
        let a = sample(&q, 200, seed).unwrap();
        let b = sample(&q, 200, seed).unwrap();
        prop_assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                        b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn uniforms_stay_inside(seed in any::<u64>()) {
        let mut rng = XorShift64Star::new(seed);
        for _ in 0..1000 {
            let u = rng.next_uniform();
            prop_assert!(u > 0.0 && u < 1.0);
        }
    }
}

#[test]
fn different_seeds_differ() {
    let q = stable(1.0, 1.0).quantile;
    assert_ne!(sample(&q, 10, 1).unwrap().values, sample(&q, 10, 2).unwrap().values);
}

#[test]
fn cauchy_median_and_ks() {
    let q = stable(1.0, 1.0).quantile;
    let xs = sample(&q, 10_000, 12345).unwrap().values;
    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (sorted[4999] + sorted[5000]);
    assert!(median.abs() < 0.02, "median {median}");
    let d = ks_statistic(&xs, |x| 0.5 + x.atan() / std::f64::consts::PI);
    assert!(d < 1.63 / (xs.len() as f64).sqrt(), "KS {d}");
}

#[test]
fn stable_two_scaled_is_standard_normal() {
    let q = stable(2.0, 1.0 / 2f64.sqrt()).quantile;
    let xs = sample(&q, 100_000, 7).unwrap().values;
    let below = xs.iter().filter(|&&x| x < 1.0).count() as f64 / xs.len() as f64;
    assert!((below - 0.8413).abs() < 0.005, "fraction {below}");
    let d = ks_statistic(&xs, normal_cdf);
    assert!(d < 1.63 / (xs.len() as f64).sqrt(), "KS {d}");
}

#[test]
fn near_gaussian_draws_are_unskewed() {
    for q in [gaussian().quantile, stable(2.0, 1.0).quantile] {
        let xs = sample(&q, 100_000, 99).unwrap().values;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        assert!(skew.abs() < 0.05, "skewness {skew}");
    }
}

#[test]
fn levy_area_variance() {
    // Var L = Var X + Δt² Var P with Var X = Δt²/3 for the logistic loop part
    // and Var P = r²/3.
    let (r, dt) = (1.0, 1.0);
    let batch = sample_levy_area(r, dt, 100_000, 2024, &LevyAreaOptions::default(), store(), &QuadratureConfig::default())
        .unwrap();
    let n = batch.values.len() as f64;
    let mean = batch.values.iter().sum::<f64>() / n;
    let var = batch.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want = dt * dt / 3.0 + dt * dt * r * r / 3.0;
    assert!((var / want - 1.0).abs() < 0.05, "variance {var} vs {want}");
    let again = sample_levy_area(r, dt, 100_000, 2024, &LevyAreaOptions::default(), store(), &QuadratureConfig::default())
        .unwrap();
    assert_eq!(batch, again);
}

#[test]
fn loop_quantile_upper_quartile() {
    let dt = 0.7;
    let want = dt * 3f64.ln() / std::f64::consts::PI;
    assert!((levy_loop_quantile(0.75, dt) - want).abs() < 1e-15);
}
