mod common;

use common::{linear_dataset, logistic_dataset};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rssl::forest::{fit_forest, fit_tree, ForestConfig, TreeParams};
use rssl::{RngStream, Task};

#[test]
fn single_tree_fits_pure_split_exactly() {
    let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
    let y = [0.0, 0.0, 1.0, 1.0];
    let params = TreeParams {
        task: Task::Classification,
        mtry: 1,
        min_leaf: 1,
        max_depth: 30,
    };
    let tree = fit_tree(&x, &y, &params, &mut RngStream::derive(0, &[5])).unwrap();
    for i in 0..4 {
        assert_eq!(tree.predict(&[x[(i, 0)]]), y[i]);
    }
    assert_eq!(tree.leaves(), 2);
}

#[test]
fn deep_regression_tree_interpolates_distinct_rows() {
    let data = linear_dataset(50, 3, &[1.0, 2.0, 3.0], 1.0, 1);
    let params = TreeParams {
        task: Task::Regression,
        mtry: 3,
        min_leaf: 1,
        max_depth: 60,
    };
    let tree = fit_tree(
        data.features(),
        data.target(),
        &params,
        &mut RngStream::derive(1, &[5]),
    )
    .unwrap();
    for i in 0..data.n() {
        assert!((tree.predict(&data.row(i)) - data.target()[i]).abs() < 1e-12);
    }
}

#[test]
fn forest_is_deterministic_and_seed_sensitive() {
    let data = logistic_dataset(60, 5, 2);
    let cfg = ForestConfig {
        trees: 25,
        seed: 4,
        ..Default::default()
    };
    let a = fit_forest(&data, &cfg).unwrap();
    let b = fit_forest(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = fit_forest(&data, &ForestConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn regression_forest_stays_within_target_range(seed in any::<u64>()) {
        let data = linear_dataset(40, 4, &[1.0, -1.0, 2.0, 0.0], 1.0, seed);
        let forest = fit_forest(&data, &ForestConfig { trees: 10, seed, ..Default::default() }).unwrap();
        let lo = data.target().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.target().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = RngStream::derive(seed, &[3]);
        let probe = DMatrix::from_fn(20, 4, |_, _| 3.0 * rng.next_gaussian());
        for v in forest.predict_matrix(&probe) {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn classification_forest_votes_are_binary(seed in any::<u64>()) {
        let data = logistic_dataset(40, 4, seed);
        let forest = fit_forest(&data, &ForestConfig { trees: 7, seed, ..Default::default() }).unwrap();
        for v in forest.predict_matrix(data.features()) {
            prop_assert!(v == 0.0 || v == 1.0);
        }
    }

    #[test]
    fn depth_limit_is_respected(seed in any::<u64>(), depth in 1usize..5) {
        let data = linear_dataset(60, 3, &[1.0, 1.0, 1.0], 1.0, seed);
        let params = TreeParams { task: Task::Regression, mtry: 3, min_leaf: 1, max_depth: depth };
        let tree = fit_tree(data.features(), data.target(), &params, &mut RngStream::derive(seed, &[1])).unwrap();
        prop_assert!(tree.depth() <= depth);
        prop_assert!(tree.leaves() <= 1 << depth);
    }
}
