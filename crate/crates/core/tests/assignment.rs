mod common;

use lsm_core::assign::{
    canonical_assignment, cost, delta_r, lemma1_gap, residual_table, DEFAULT_TIE_TOL,
};
use lsm_core::model::{Dataset, ParameterMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn small_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

/// Data with a coarse grid of values so exact ties between modes are common.
fn tie_prone() -> impl Strategy<Value = (Dataset, ParameterMatrix)> {
    (2usize..=9, 1usize..=3).prop_flat_map(|(len, s)| {
        (
            prop::collection::vec(-2i32..=2, len),
            prop::collection::vec(-2i32..=2, len),
            prop::collection::vec(-1i32..=1, s),
        )
            .prop_map(move |(x, y, a)| {
                let x = DMatrix::from_iterator(1, len, x.iter().map(|&v| v as f64));
                let y = DVector::from_iterator(len, y.iter().map(|&v| v as f64));
                let a = DMatrix::from_iterator(1, s, a.iter().map(|&v| v as f64));
                (Dataset::new(x, y, None).unwrap(), ParameterMatrix::new(a).unwrap())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lemma1_gap_nonnegative_and_matches_oracle(
        (v, vp, r) in (1usize..=10).prop_flat_map(|n| (small_vec(n), small_vec(n), 0..=n))
    ) {
        let gap = lemma1_gap(&v, &vp, r).unwrap();
        prop_assert!(gap >= -1e-9);
        prop_assert!((gap - common::lemma1_gap_oracle(&v, &vp, r)).abs() <= 1e-9);
    }

    #[test]
    fn delta_r_is_sparse_distance_and_nonincreasing(phi in (1usize..=10).prop_flat_map(small_vec)) {
        let n = phi.len();
        let mut prev = f64::INFINITY;
        for r in 0..=n {
            let d = delta_r(&phi, r).unwrap();
            prop_assert!((d - common::sparse_distance(&phi, r)).abs() <= 1e-12);
            prop_assert!(d <= prev);
            prev = d;
        }
        prop_assert_eq!(delta_r(&phi, n).unwrap(), 0.0);
        prop_assert!((delta_r(&phi, 0).unwrap() - phi.iter().map(|v| v.abs()).sum::<f64>()).abs() <= 1e-12);
    }

    #[test]
    fn canonical_assignment_matches_exhaustive_search((data, a) in tie_prone()) {
        let res = canonical_assignment(&data, &a, DEFAULT_TIE_TOL).unwrap();
        let table = residual_table(&data, &a).unwrap();
        prop_assert_eq!(&res.sigma, &common::assignment_oracle(&table, a.s(), DEFAULT_TIE_TOL));
        prop_assert!((res.cost - cost(&data, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn cost_is_invariant_under_column_permutation(
        seed in any::<u64>(),
        len in 2usize..30,
    ) {
        let sim = common::instance(2, 3, len, Default::default(), seed);
        let a = &sim.dataset.truth().unwrap().a_true;
        let base = cost(&sim.dataset, a).unwrap();
        for pi in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            prop_assert_eq!(cost(&sim.dataset, &a.permuted(&pi)).unwrap(), base);
        }
    }

    #[test]
    fn labels_follow_column_permutation_without_ties(seed in any::<u64>(), len in 2usize..30) {
        let sim = common::instance(2, 3, len, Default::default(), seed);
        let data = &sim.dataset;
        let a = &data.truth().unwrap().a_true;
        let base = canonical_assignment(data, a, 0.0).unwrap();
        let pi = [2, 0, 1];
        let permuted = canonical_assignment(data, &a.permuted(&pi), 0.0).unwrap();
        // Column i of the permuted matrix is column pi[i] of the original.
        for t in 0..len {
            prop_assert_eq!(pi[permuted.sigma[t]], base.sigma[t]);
        }
    }
}

#[test]
fn all_ties_example() {
    let data = Dataset::new(
        DMatrix::from_element(1, 4, 1.0),
        DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
        None,
    )
    .unwrap();
    let a = ParameterMatrix::new(DMatrix::from_element(1, 2, 0.0)).unwrap();
    let res = canonical_assignment(&data, &a, DEFAULT_TIE_TOL).unwrap();
    assert_eq!(res.sigma, vec![0, 0, 1, 1]);
    assert_eq!(res.min_cardinality, 2);
}

#[test]
fn delta_examples() {
    let phi = [3.0, -1.0, 0.5, 2.0];
    assert!((delta_r(&phi, 2).unwrap() - 1.5).abs() < 1e-15);
    assert_eq!(delta_r(&phi, 4).unwrap(), 0.0);
    assert!((delta_r(&phi, 0).unwrap() - 6.5).abs() < 1e-15);
}

#[test]
fn residuals_of_the_truth_are_the_noise_when_labels_match() {
    let noise = lsm_core::model::NoiseSpec {
        dense: lsm_core::model::DenseNoise::Uniform { bound: 1e-3 },
        ..Default::default()
    };
    for seed in 0..20 {
        let sim = common::instance(2, 2, 25, noise, seed);
        let data = &sim.dataset;
        let truth = data.truth().unwrap();
        let res = canonical_assignment(data, &truth.a_true, DEFAULT_TIE_TOL).unwrap();
        for t in 0..data.len() {
            if res.sigma[t] == truth.sigma[t] {
                assert!((res.phi[t] - truth.v[t]).abs() <= 1e-10);
            }
        }
        assert!(cost(data, &truth.a_true).unwrap() <= truth.v.iter().map(|v| v.abs()).sum::<f64>() + 1e-10);
    }
}
