//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are expected to fail and are reported with
//! diagnostics; the process exits nonzero if any other criterion fails or if
//! a known-red criterion starts passing.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lsm_core::analysis::{g_of_lambda, matched_error, norm_2col, residual_difference};
use lsm_core::assign::{canonical_assignment, cost, delta_r, lemma1_gap, DEFAULT_TIE_TOL};
use lsm_core::estimator::{lsm_alternating, lsm_bruteforce, EstimatorConfig};
use lsm_core::metrics::{
    compute_metrics, d_hat, genericity_index, xi_single_mode_exact, xi_single_mode_lower_curve,
    xi_single_mode_upper, MetricsConfig, DEFAULT_RANK_TOL, DEFAULT_SUBSET_BUDGET,
};
use lsm_core::model::{trial_seed, Dataset, DenseNoise, NoiseSpec, OutlierSign, ParameterMatrix, SparseNoise, Truth};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TIE: f64 = DEFAULT_TIE_TOL;
const B: u128 = DEFAULT_SUBSET_BUDGET;

/// Sparse-noise recovery at outlier magnitudes 1e3..1e6: the true matrix is
/// not a minimiser of the objective on these instances, so no minimiser of
/// it can meet the criterion. See the README.
const KNOWN_RED: &[usize] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sparse(count: usize, lo: f64, hi: f64) -> SparseNoise {
    SparseNoise {
        count,
        magnitude_range: [lo, hi],
        sign: OutlierSign::Random,
    }
}

fn noiseless_recovery() -> Outcome {
    let start = Instant::now();
    let mut ok = 0;
    for trial in 0..50 {
        let sim = common::instance(2, 2, 60, NoiseSpec::noiseless(), trial_seed(1, trial));
        let data = &sim.dataset;
        let cfg = EstimatorConfig {
            seed: trial_seed(2, trial),
            ..Default::default()
        };
        let est = lsm_alternating(data, 2, &cfg).unwrap();
        if matched_error(&data.truth().unwrap().a_true, &est.a_hat, None) <= 1e-6 {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok >= 49 && elapsed < Duration::from_secs(60),
        format!("{ok}/50 recovered within 1e-6, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut ok = 0;
    let mut slowest = Duration::ZERO;
    for trial in 0..100u64 {
        let n = 1 + (trial % 2) as usize;
        let len = 6 + (trial % 5) as usize;
        let noise = NoiseSpec {
            dense: DenseNoise::Gaussian { std: 0.3 },
            sparse: sparse((trial % 3) as usize, 2.0, 10.0),
            seed: 0,
        };
        let seed = trial_seed(1000, trial);
        let sim = common::instance(n, 2, len, noise, seed);
        let cfg = EstimatorConfig {
            seed,
            restarts: 50,
            ..Default::default()
        };
        let h = lsm_alternating(&sim.dataset, 2, &cfg).unwrap();
        let start = Instant::now();
        let b = lsm_bruteforce(&sim.dataset, 2, 1_000_000, 1e-9).unwrap();
        slowest = slowest.max(start.elapsed());
        if (h.cost - b.cost).abs() <= 1e-9 {
            ok += 1;
        }
    }
    outcome(
        ok >= 95 && slowest < Duration::from_secs(1),
        format!("{ok}/100 heuristic costs equal the oracle within 1e-9, slowest oracle {:.3} s", slowest.as_secs_f64()),
    )
}

fn sparse_recovery() -> Outcome {
    let mut ok = 0;
    let mut truth_beaten = 0;
    for trial in 0..50 {
        let noise = NoiseSpec {
            sparse: sparse(3, 1e3, 1e6),
            ..Default::default()
        };
        let sim = common::instance(2, 2, 40, noise, trial_seed(3, trial));
        let data = &sim.dataset;
        let a0 = &data.truth().unwrap().a_true;
        let cfg = EstimatorConfig {
            seed: trial_seed(4, trial),
            ..Default::default()
        };
        let est = lsm_alternating(data, 2, &cfg).unwrap();
        if matched_error(a0, &est.a_hat, None) <= 1e-6 {
            ok += 1;
        }
        if est.cost < cost(data, a0).unwrap() - 1e-9 {
            truth_beaten += 1;
        }
    }
    outcome(
        ok >= 45,
        format!("{ok}/50 recovered within 1e-6; in {truth_beaten}/50 trials the estimate costs less than the true matrix"),
    )
}

fn lemma1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let len = rng.random_range(1..=12);
        let scale = 10f64.powi(rng.random_range(-2..=3));
        let v: Vec<f64> = (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let vp: Vec<f64> = (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let r = rng.random_range(0..=len);
        let gap = lemma1_gap(&v, &vp, r).unwrap();
        let oracle = common::lemma1_gap_oracle(&v, &vp, r);
        worst = worst.min(gap);
        if gap >= -1e-9 && (gap - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()) {
            ok += 1;
        }
    }
    outcome(ok == 1000, format!("{ok}/1000 nonnegative and equal to the oracle, smallest gap {worst:.3e}"))
}

fn lemma2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let (mut ok, mut checked) = (0, 0);
    for seed in 0..10 {
        let noise = NoiseSpec {
            sparse: sparse(2, 1.0, 50.0),
            ..Default::default()
        };
        let sim = common::instance(2, 1, 30, noise, seed);
        let data = &sim.dataset;
        let x = data.x();
        let Some((r, xi)) = (1..x.ncols())
            .map(|r| (r, xi_single_mode_upper(x, r, DEFAULT_RANK_TOL).unwrap()))
            .filter(|&(_, xi)| xi < 0.5)
            .last()
        else {
            continue;
        };
        let a0 = data.truth().unwrap().a_true.clone();
        for _ in 0..20 {
            let a = if rng.random_bool(0.5) {
                a0.clone()
            } else {
                ParameterMatrix::new(DMatrix::from_fn(2, 1, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap()
            };
            let ap =
                ParameterMatrix::new(DMatrix::from_fn(2, 1, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal))).unwrap();
            let lhs = residual_difference(data, &a, &ap, TIE).unwrap().lp_norm(1);
            let pa = canonical_assignment(data, &a, TIE).unwrap();
            let rhs = (cost(data, &ap).unwrap() - pa.cost + 2.0 * delta_r(&pa.phi, r).unwrap()) / (1.0 - 2.0 * xi);
            checked += 1;
            if lhs <= rhs + 1e-9 {
                ok += 1;
            }
        }
    }
    outcome(ok == 200 && checked == 200, format!("{ok}/{checked} pairs satisfy the inequality"))
}

fn genericity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let mut ok = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let len = rng.random_range(n..=9);
        let x = loop {
            let x: Vec<Vec<i64>> = (0..n).map(|_| (0..len).map(|_| rng.random_range(-2..=2)).collect()).collect();
            if common::exact_rank(&x) == n {
                break x;
            }
        };
        if genericity_index(&common::int_to_matrix(&x), DEFAULT_RANK_TOL, B).unwrap().nu == common::nu_oracle(&x) {
            ok += 1;
        }
    }
    // Four copies of one column among seven: any five columns hold another.
    let dup = vec![vec![1, 1, 1, 1, 0, 1, 2], vec![2, 2, 2, 2, 1, -1, 0]];
    let nu = genericity_index(&common::int_to_matrix(&dup), DEFAULT_RANK_TOL, B).unwrap().nu;
    let dup_ok = nu == common::nu_oracle(&dup) && nu == 5;
    outcome(ok == 50 && dup_ok, format!("{ok}/50 random matrices match the oracle; duplicated columns give nu = {nu}"))
}

fn lemma8_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let (mut ok, mut worst) = (0, f64::INFINITY);
    for seed in 0..10 {
        let x = common::instance(2, 1, 10, NoiseSpec::noiseless(), seed).dataset.x().clone();
        let nu = genericity_index(&x, DEFAULT_RANK_TOL, B).unwrap().nu;
        let dh = d_hat(&x, nu, B).unwrap();
        for _ in 0..100 {
            let raw = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let lambda = &raw / norm_2col(&raw);
            let g = g_of_lambda(&x, &lambda, nu).unwrap();
            worst = worst.min(g - dh);
            if g >= dh - 1e-9 {
                ok += 1;
            }
        }
    }
    let mut exact = 0;
    let mut cases = 0;
    for seed in 0..8 {
        let len = 4 + (seed % 5) as usize;
        let x = common::instance(2, 1, len, NoiseSpec::noiseless(), 100 + seed).dataset.x().clone();
        for s in 1..=2 {
            for nu in 1..=len / s {
                let lambda = DMatrix::from_fn(2, s, |_, _| rng.sample::<f64, _>(StandardNormal));
                let g = g_of_lambda(&x, &lambda, nu).unwrap();
                let oracle = common::g_oracle(&x, &lambda, nu);
                cases += 1;
                if (g - oracle).abs() <= 1e-9 * (1.0 + oracle) {
                    exact += 1;
                }
            }
        }
    }
    outcome(
        ok == 1000 && exact == cases,
        format!("{ok}/1000 with g >= d_hat (smallest slack {worst:.3e}); {exact}/{cases} equal to enumeration"),
    )
}

fn proposition1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(85);
    let perturbed = |sim: &lsm_core::model::Simulation, v: Vec<f64>| {
        let data = &sim.dataset;
        let truth = data.truth().unwrap();
        let y = DVector::from_fn(data.len(), |t, _| data.regressor(t).dot(&truth.a_true.column(truth.sigma[t])) + v[t]);
        Dataset::new(data.x().clone(), y, Some(Truth { v, ..truth.clone() })).unwrap()
    };
    // Half the smallest gap between the fitted values of two modes at t.
    let gaps = |data: &Dataset, a: &ParameterMatrix, t: usize| -> Vec<f64> {
        (0..a.s()).map(|j| data.regressor(t).dot(&(a.column(data.truth().unwrap().sigma[t]) - a.column(j)))).collect()
    };
    let mut below = 0;
    for trial in 0..100 {
        let s = 2 + (trial % 2) as usize;
        let sim = common::instance(2, s, 30, NoiseSpec::noiseless(), trial_seed(8, trial));
        let data = &sim.dataset;
        let a0 = data.truth().unwrap().a_true.clone();
        let v: Vec<f64> = (0..data.len())
            .map(|t| {
                let th = 0.5
                    * gaps(data, &a0, t)
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != data.truth().unwrap().sigma[t])
                        .map(|(_, d)| d.abs())
                        .fold(f64::INFINITY, f64::min);
                0.99 * rng.random_range(-1.0..=1.0) * th
            })
            .collect();
        let noisy = perturbed(&sim, v);
        if canonical_assignment(&noisy, &a0, TIE).unwrap().sigma == noisy.truth().unwrap().sigma {
            below += 1;
        }
    }
    let mut witnessed = 0;
    for trial in 0..20 {
        let sim = common::instance(2, 2, 30, NoiseSpec::noiseless(), trial_seed(9, trial));
        let data = &sim.dataset;
        let truth = data.truth().unwrap();
        let a0 = truth.a_true.clone();
        let t = rng.random_range(0..data.len());
        let d = gaps(data, &a0, t)[1 - truth.sigma[t]];
        let mut v = vec![0.0; data.len()];
        v[t] = -d.signum() * (d.abs() / 2.0 + 1e-6 * (1.0 + d.abs()));
        let noisy = perturbed(&sim, v);
        if canonical_assignment(&noisy, &a0, TIE).unwrap().sigma != truth.sigma {
            witnessed += 1;
        }
    }
    outcome(
        below == 100 && witnessed >= 1,
        format!("{below}/100 labels reproduced below the threshold; {witnessed}/20 mismatches just above it"),
    )
}

fn constant_regressors() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(96);
    let mut failures = Vec::new();
    for len in 3..=10 {
        let c = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let x = DMatrix::from_element(1, len, c);
        let lower = xi_single_mode_lower_curve(&x, 100, len as u64, B);
        for r in 0..=len {
            let exact_value = r as f64 / len as f64;
            let exact = xi_single_mode_exact(&x, r, DEFAULT_RANK_TOL, B).unwrap();
            let upper = xi_single_mode_upper(&x, r, DEFAULT_RANK_TOL).unwrap();
            if (exact - exact_value).abs() > 1e-9 || lower[r] > exact_value + 1e-12 || upper < exact_value - 1e-12 {
                failures.push(format!("N={len} r={r}"));
            }
        }
        let y = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(x, y, None).unwrap();
        let report = compute_metrics(&data, 1, &MetricsConfig::default(), Vec::new()).unwrap();
        let expected = len.div_ceil(2) - 1;
        if report.r_star_lower.value != expected || !report.r_star_lower.certified {
            failures.push(format!("N={len} r_star={} expected {expected}", report.r_star_lower.value));
        }
    }
    let detail = if failures.is_empty() {
        "N = 3..10: exact ratio r/N, bracket contains it, r_star = ceil(N/2) - 1".to_string()
    } else {
        format!("mismatches: {}", failures.join(", "))
    };
    outcome(failures.is_empty(), detail)
}

fn run_cli(dir: &Path, threads: usize, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lsm"))
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .current_dir(dir)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(
        root.join("config.json"),
        r#"{"system": {"n": 2, "s": 2}, "data": {"N": 10, "seed": 21},
            "noise": {"dense": {"kind": "gaussian", "std": 0.05}, "sparse": {"count": 1, "magnitude_range": [2, 5]}},
            "metrics": {"xi_samples": 200},
            "experiment": {"trials": 3, "sweep": {"outliers": [0, 1], "noise_std": [0.0, 0.1]}}}"#,
    )
    .unwrap();
    let mut runs = Vec::new();
    for (k, threads) in [1, 8, 1, 8].into_iter().enumerate() {
        let out = format!("run{k}");
        let data = format!("{out}/dataset.csv");
        let est = format!("{out}/estimate.json");
        let met = format!("{out}/metrics.json");
        let c = ["--config", "config.json", "--out", out.as_str()];
        let steps: [Vec<&str>; 5] = [
            [&["simulate"][..], &c[..]].concat(),
            [&["estimate"][..], &c[..], &["--data", data.as_str(), "--mode", "both"][..]].concat(),
            [&["metrics"][..], &c[..], &["--data", data.as_str()][..]].concat(),
            [&["bounds"][..], &c[..], &["--data", data.as_str(), "--estimate", est.as_str(), "--metrics", met.as_str()][..]]
                .concat(),
            [&["experiment"][..], &c[..]].concat(),
        ];
        for step in &steps {
            if !run_cli(root, threads, step) {
                return outcome(false, format!("`lsm {}` failed with {threads} threads", step[0]));
            }
        }
        runs.push(snapshot(&root.join(&out)));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    let same = runs.iter().all(|r| r == &runs[0]);
    outcome(
        same && names.len() >= 9,
        format!("{} files from all five commands, 4 runs at 1 and 8 threads, identical: {same}", names.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("noiseless exact recovery", noiseless_recovery),
        ("heuristic matches the oracle", oracle_equivalence),
        ("sparse-noise exact recovery", sparse_recovery),
        ("l1 concentration inequality", lemma1),
        ("residual inequality, certified single mode", lemma2),
        ("genericity index", genericity),
        ("g(Lambda) >= d_hat and exact g", lemma8_chain),
        ("noise threshold for label recovery", proposition1),
        ("constant regressor ratios", constant_regressors),
        ("determinism across runs and threads", determinism),
    ];
    let mut unexpected = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        let start = Instant::now();
        let out = check();
        let known = KNOWN_RED.contains(&id);
        let tag = match (out.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("C{id:<2} {tag:<12} {name}: {} [{:.1} s]", out.detail, start.elapsed().as_secs_f64());
        if out.pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
