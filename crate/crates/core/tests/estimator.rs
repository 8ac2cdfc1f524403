mod common;

use lsm_core::analysis::matched_error;
use lsm_core::assign::cost;
use lsm_core::estimator::{
    estimate, lad_regression, lsm_alternating, lsm_bruteforce, EstimatorConfig, EstimatorMode, SolverStatus,
};
use lsm_core::linalg::select_columns;
use lsm_core::model::{Dataset, DenseNoise, NoiseSpec, OutlierSign, ParameterMatrix, SparseNoise};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn noisy(std: f64, outliers: usize) -> NoiseSpec {
    NoiseSpec {
        dense: if std > 0.0 {
            DenseNoise::Gaussian { std }
        } else {
            DenseNoise::None
        },
        sparse: SparseNoise {
            count: outliers,
            magnitude_range: [2.0, 10.0],
            sign: OutlierSign::Random,
        },
        seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn lad_matches_vertex_enumeration(seed in any::<u64>(), n in 1usize..=3, extra in 0usize..6) {
        let sim = common::instance(n, 1, n + extra, noisy(0.5, 1), seed);
        let data = &sim.dataset;
        let y: Vec<f64> = data.y().iter().copied().collect();
        let fit = lad_regression(data.x(), &y).unwrap();
        let all: Vec<usize> = (0..data.len()).collect();
        let oracle = common::lad_oracle(data.x(), &y, &all);
        prop_assert!((fit.objective - oracle).abs() <= 1e-9 * (1.0 + oracle));
        let direct: f64 = (0..data.len()).map(|t| (y[t] - data.x().column(t).dot(&fit.a)).abs()).sum();
        prop_assert!((direct - fit.objective).abs() <= 1e-9 * (1.0 + oracle));
    }

    #[test]
    fn heuristic_never_beats_the_oracle_and_trace_is_monotone(seed in any::<u64>(), len in 4usize..=8) {
        let sim = common::instance(1, 2, len, noisy(0.3, 1), seed);
        let data = &sim.dataset;
        let cfg = EstimatorConfig { seed, restarts: 5, ..Default::default() };
        let h = lsm_alternating(data, 2, &cfg).unwrap();
        let b = lsm_bruteforce(data, 2, 1_000_000, cfg.tie_tol).unwrap();
        prop_assert!(b.cost <= h.cost + 1e-9);
        prop_assert!((h.cost - cost(data, &h.a_hat).unwrap()).abs() <= 1e-9);
        for trace in &h.traces {
            prop_assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}

#[test]
fn bruteforce_matches_labelling_enumeration() {
    for seed in 0..12u64 {
        let n = 1 + (seed % 2) as usize;
        let len = 5 + (seed % 3) as usize;
        let sim = common::instance(n, 2, len, noisy(0.5, (seed % 2) as usize), seed);
        let data = &sim.dataset;
        let y: Vec<f64> = data.y().iter().copied().collect();
        let oracle = common::lsm_oracle(data.x(), &y, 2);
        let b = lsm_bruteforce(data, 2, 1_000_000, 1e-9).unwrap();
        assert!((b.cost - oracle).abs() <= 1e-9 * (1.0 + oracle), "seed {seed}: {} vs {oracle}", b.cost);
        assert_eq!(b.status, SolverStatus::OracleExact);
    }
}

#[test]
fn scalar_two_cluster_example() {
    let data = Dataset::new(
        DMatrix::from_element(1, 4, 1.0),
        DVector::from_vec(vec![0.0, 0.0, 10.0, 10.0]),
        None,
    )
    .unwrap();
    let b = lsm_bruteforce(&data, 2, 1_000, 1e-9).unwrap();
    assert!(b.cost.abs() < 1e-12);
    let mut cols = b.a_hat.columns();
    cols.sort_by(|a, b| a[0].total_cmp(&b[0]));
    assert_eq!(cols, vec![vec![0.0], vec![10.0]]);
    let h = lsm_alternating(&data, 2, &EstimatorConfig::default()).unwrap();
    assert!(h.cost.abs() < 1e-12);
}

#[test]
fn noiseless_recovery_of_generic_instance() {
    for seed in 0..5 {
        let sim = common::instance(2, 2, 60, NoiseSpec::noiseless(), seed);
        let data = &sim.dataset;
        let r = lsm_alternating(data, 2, &EstimatorConfig { seed, ..Default::default() }).unwrap();
        assert!(r.cost <= 1e-8);
        assert!(matched_error(&data.truth().unwrap().a_true, &r.a_hat, None) <= 1e-6);
    }
}

#[test]
fn both_mode_reports_dominance() {
    let sim = common::instance(2, 2, 8, noisy(0.2, 1), 11);
    let cfg = EstimatorConfig {
        mode: EstimatorMode::Both,
        ..Default::default()
    };
    let est = estimate(&sim.dataset, 2, &cfg).unwrap();
    let (h, o) = (est.heuristic.unwrap(), est.oracle.unwrap());
    assert!(o.cost <= h.cost + 1e-12);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sim = common::instance(2, 3, 40, noisy(0.1, 2), 5);
    let cfg = EstimatorConfig {
        seed: 9,
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| lsm_alternating(&sim.dataset, 3, &cfg).unwrap())
    };
    let one = run(1);
    let many = run(6);
    assert_eq!(one, many);
}

#[test]
fn lad_on_selected_columns() {
    let sim = common::instance(2, 2, 12, NoiseSpec::noiseless(), 3);
    let data = &sim.dataset;
    let truth = data.truth().unwrap();
    let idx: Vec<usize> = (0..data.len()).filter(|&t| truth.sigma[t] == 0).collect();
    let y: Vec<f64> = idx.iter().map(|&t| data.y()[t]).collect();
    let fit = lad_regression(&select_columns(data.x(), &idx), &y).unwrap();
    let a0: ParameterMatrix = truth.a_true.clone();
    assert!((fit.a - a0.column(0)).norm() <= 1e-9);
}
