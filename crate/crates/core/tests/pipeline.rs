use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use soh_core::pipeline::{fgsm_augment, leave_one_cell_out, random_search, rf_rfe_cv, FeatureMatrix};
use soh_core::regressors::{Hyperparameters, ModelKind};
use soh_core::Execution;

const NAMES: [&str; 10] = [
    "ccct_s",
    "cc_energy_wh",
    "cc_kurtosis",
    "cc_skewness",
    "cc_slope",
    "cc_frechet",
    "cc_hausdorff",
    "cc_shannon_entropy",
    "cc_curve_entropy",
    "cc_mean_current_a",
];

fn matrix(rows_per_cell: usize, cells: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows_per_cell * cells;
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let y = (0..n).map(|r| f(&x.row(r).iter().copied().collect::<Vec<_>>())).collect();
    let groups = (0..n).map(|r| format!("cell{}", r / rows_per_cell)).collect();
    let cycles = (0..n).map(|r| (r % rows_per_cell) as u32 + 2).collect();
    FeatureMatrix::new(NAMES[..d].iter().map(|s| s.to_string()).collect(), x, y, groups, cycles).unwrap()
}

#[test]
fn selection_keeps_the_informative_columns() {
    let fm = matrix(40, 4, 10, 1, |x| 0.85 + 0.05 * x[0] + 0.04 * x[3] - 0.03 * x[6]);
    let result = rf_rfe_cv(&fm, 100, 2, Execution::default()).unwrap();
    for name in ["ccct_s", "cc_skewness", "cc_hausdorff"] {
        assert!(result.selected.iter().any(|s| s == name), "{name} missing from {:?}", result.selected);
    }
    let mut gone = Vec::new();
    for step in &result.steps {
        assert!(gone.iter().all(|g| !step.features.contains(g)));
        gone.extend(step.eliminated.clone());
    }
    assert_eq!(result.steps.len(), 10);
}

#[test]
fn selection_with_one_feature_keeps_it() {
    let fm = matrix(10, 3, 1, 3, |x| 0.9 + 0.01 * x[0]);
    let result = rf_rfe_cv(&fm, 20, 4, Execution::Sequential).unwrap();
    assert_eq!(result.selected, vec!["ccct_s".to_string()]);
    assert_eq!(result.steps.len(), 1);
}

#[test]
fn selection_is_reproducible_across_execution_modes() {
    let fm = matrix(15, 3, 5, 5, |x| 0.9 + 0.02 * x[1]);
    let a = rf_rfe_cv(&fm, 30, 6, Execution::Sequential).unwrap();
    let b = rf_rfe_cv(&fm, 30, 6, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gp_search_recovers_the_length_scale() {
    // One draw from a GP prior with length-scale 1 on [-3, 3], lightly noised.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 120;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| (-(xs[i] - xs[j]).powi(2) / 2.0).exp() + if i == j { 1e-8 } else { 0.0 });
    let z = nalgebra::DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let f = k.cholesky().unwrap().l() * z;
    let y: Vec<f64> = (0..n).map(|i| 0.85 + 0.03 * f[i] + 0.0005 * rng.sample::<f64, _>(StandardNormal)).collect();
    let groups = (0..n).map(|i| format!("cell{}", i % 6)).collect();
    let fm = FeatureMatrix::new(vec!["ccct_s".into()], DMatrix::from_column_slice(n, 1, &xs), y, groups, vec![2; n]).unwrap();
    let result = random_search(ModelKind::Gpr, &fm, 50, 8, Execution::default()).unwrap();
    let Hyperparameters::Gpr(h) = result.best else { panic!("wrong kind") };
    assert!((0.5..=2.0).contains(&h.length_scale()), "length-scale {}", h.length_scale());
    assert_eq!(result.trials.len(), 50);
}

#[test]
fn search_is_seed_deterministic_and_fixed_kinds_skip_it() {
    let fm = matrix(12, 3, 2, 9, |x| 0.9 + 0.03 * x[0]);
    let a = random_search(ModelKind::Brr, &fm, 5, 1, Execution::Sequential).unwrap();
    let b = random_search(ModelKind::Brr, &fm, 5, 1, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    for kind in [ModelKind::Rf, ModelKind::Dnne] {
        let r = random_search(kind, &fm, 5, 1, Execution::Sequential).unwrap();
        assert!(r.trials.is_empty());
        assert_eq!(r.best, Hyperparameters::default_for(kind));
    }
}

#[test]
fn zero_gamma_duplicates_rows() {
    let fm = matrix(6, 2, 3, 10, |x| 0.9 + 0.01 * x[2]);
    let aug = fgsm_augment(&fm, 0.0).unwrap();
    assert_eq!(aug.nrows(), 24);
    assert_eq!(aug.x.rows(0, 12), aug.x.rows(12, 12));
    assert_eq!(aug.adversarial, [vec![false; 12], vec![true; 12]].concat());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loco_folds_are_disjoint(cells in 2usize..6, rows in 1usize..8, seed in 0u64..100) {
        let fm = fgsm_augment(&matrix(rows, cells, 2, seed, |x| 0.9 + 0.02 * x[0]), 0.01).unwrap();
        let folds = leave_one_cell_out(&fm).unwrap();
        prop_assert_eq!(folds.len(), cells);
        for fold in &folds {
            for &v in &fold.validate {
                prop_assert!(!fm.adversarial[v]);
                prop_assert_eq!(&fm.groups[v], &fold.held_out);
            }
            prop_assert!(fold.train.iter().all(|&t| fm.groups[t] != fold.held_out));
            prop_assert_eq!(fold.validate.len(), rows);
        }
    }

    #[test]
    fn augmentation_doubles_and_preserves(rows in 2usize..10, gamma in 0.0f64..0.1, seed in 0u64..100) {
        let fm = matrix(rows, 2, 4, seed, |x| 0.9 + 0.02 * x[0] - 0.01 * x[3]);
        let aug = fgsm_augment(&fm, gamma).unwrap();
        let n = fm.nrows();
        prop_assert_eq!(aug.nrows(), 2 * n);
        prop_assert_eq!(aug.x.rows(0, n).into_owned(), fm.x.clone());
        prop_assert_eq!(&aug.y[n..], &fm.y[..]);
        for j in 0..fm.ncols() {
            let c = fm.x.column(j);
            let range = c.max() - c.min();
            for r in 0..n {
                let step = aug.x[(n + r, j)] - fm.x[(r, j)];
                prop_assert!(step == 0.0 || (step.abs() - gamma * range).abs() <= 1e-15);
            }
        }
    }
}
