mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use soh_core::regressors::PredictiveDistribution;
use soh_core::uncertainty::{
    alpha_beta_pep, c_score, mape, pava, reliability, rmspe, MetricsReport, RecalibrationMap, ReliabilityCurve,
};

fn calibrated_sample(n: usize, seed: u64) -> (Vec<PredictiveDistribution>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mu = rng.random_range(0.75..1.0);
            let sd = rng.random_range(0.002..0.02);
            (PredictiveDistribution::new(mu, sd * sd), Normal::new(mu, sd).unwrap().sample(&mut rng))
        })
        .unzip()
}

#[test]
fn beta_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let preds: Vec<_> = (0..200)
        .map(|_| PredictiveDistribution::new(rng.random_range(0.8..1.0), rng.random_range(1e-6..4e-4)))
        .collect();
    let y: Vec<f64> = (0..200).map(|_| rng.random_range(0.8..1.0)).collect();
    let (_, beta, _) = alpha_beta_pep(&preds, &y, 0.015).unwrap();
    let oracle = common::beta_quadrature(&preds, &y, 0.015);
    assert!((beta - oracle).abs() <= 1e-6, "{beta} vs {oracle}");
}

#[test]
fn recalibration_leaves_calibrated_predictions_alone() {
    let (cal, y_cal) = calibrated_sample(20_000, 2);
    let (test, y_test) = calibrated_sample(20_000, 3);
    let map = RecalibrationMap::fit_predictions(&cal, &y_cal).unwrap();
    let before = c_score(&test, &y_test).unwrap();
    let after = c_score(&map.apply_all(&test), &y_test).unwrap();
    let bound = 300.0 * (0.9 * 0.1 / 20_000f64).sqrt();
    assert!((before - after).abs() < bound, "{before} vs {after}");
    assert!((map.sigma_scale() - 1.0).abs() < 0.05);
}

#[test]
fn underconfident_predictions_shrink() {
    let (mut cal, y) = calibrated_sample(20_000, 4);
    for p in &mut cal {
        p.variance *= 9.0;
    }
    let k = RecalibrationMap::fit_predictions(&cal, &y).unwrap().sigma_scale();
    assert!((k - 1.0 / 3.0).abs() < 0.02, "k = {k}");
}

#[test]
fn perfect_predictions_score_perfectly() {
    let y = [0.95, 0.9, 0.85];
    let preds: Vec<_> = y.iter().map(|&v| PredictiveDistribution::new(v, 1e-12)).collect();
    let r = MetricsReport::compute(&preds, &y).unwrap();
    assert_eq!((r.mape, r.rmspe, r.alpha_accuracy, r.pep), (0.0, 0.0, 100.0, 0.0));
    assert!(r.beta > 0.999_999);
}

#[test]
fn all_high_by_two_percent() {
    let y = [0.95, 0.9, 0.85];
    let preds: Vec<_> = y.iter().map(|&v| PredictiveDistribution::new(v * 1.02, 1e-6)).collect();
    let (acc, _, pep) = alpha_beta_pep(&preds, &y, 0.015).unwrap();
    assert_eq!((acc, pep), (0.0, 0.0));
}

fn preds_and_targets() -> impl Strategy<Value = (Vec<PredictiveDistribution>, Vec<f64>)> {
    prop::collection::vec((0.6f64..1.05, 1e-4f64..0.05, 0.6f64..1.05), 1..60)
        .prop_map(|v| v.into_iter().map(|(m, s, y)| (PredictiveDistribution::new(m, s * s), y)).unzip())
}

proptest! {
    #[test]
    fn pava_is_the_monotone_projection(y in prop::collection::vec(0.0f64..1.0, 1..9)) {
        let got = pava(&y);
        let want = common::monotone_projection_brute(&y);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
        prop_assert!(got.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quadratic_mean_dominates((preds, y) in preds_and_targets()) {
        let mu: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let (m, r) = (mape(&mu, &y).unwrap(), rmspe(&mu, &y).unwrap());
        prop_assert!(m >= 0.0 && r >= m * (1.0 - 1e-12));
    }

    #[test]
    fn beta_is_bounded_and_grows_with_alpha((preds, y) in preds_and_targets(), a in 0.001f64..0.05, extra in 0.0f64..0.05) {
        let (_, b1, _) = alpha_beta_pep(&preds, &y, a).unwrap();
        let (_, b2, _) = alpha_beta_pep(&preds, &y, a + extra).unwrap();
        prop_assert!((0.0..=1.0).contains(&b1) && b2 >= b1 - 1e-15);
    }

    #[test]
    fn recalibration_keeps_means((preds, y) in preds_and_targets()) {
        prop_assume!(preds.len() >= 2);
        let Ok(map) = RecalibrationMap::fit_predictions(&preds, &y) else { return Ok(()); };
        prop_assert!(map.knots_y.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(map.sigma_scale() > 0.0);
        for (p, r) in preds.iter().zip(map.apply_all(&preds)) {
            prop_assert_eq!(p.mean, r.mean);
        }
    }

    #[test]
    fn reliability_depends_only_on_cdf_values((preds, y) in preds_and_targets(), shift in -0.5f64..0.5, scale in 0.2f64..5.0) {
        let moved: Vec<_> = preds.iter().map(|p| PredictiveDistribution::new(p.mean * scale + shift, p.variance * scale * scale)).collect();
        let ym: Vec<f64> = y.iter().map(|v| v * scale + shift).collect();
        let a: ReliabilityCurve = reliability(&preds, &y, 20).unwrap();
        let b = reliability(&moved, &ym, 20).unwrap();
        // Affine moves can shift CDF values by rounding; allow one sample per level.
        for (fa, fb) in a.frequencies.iter().zip(&b.frequencies) {
            prop_assert!((fa - fb).abs() <= 1.0 / y.len() as f64 + 1e-12);
        }
    }
}
