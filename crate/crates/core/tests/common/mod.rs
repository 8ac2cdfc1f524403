//! Definition-level oracles shared by the integration and acceptance tests.
//! Nothing here calls into the library's algorithms; each routine evaluates
//! the quantity straight from its definition by enumeration.
#![allow(dead_code)]

use itertools::Itertools;
use lsm_core::model::{
    derive_seed, random_parameter_matrix, simulate, switching_generator, FeatureMap, InputSequence,
    NoiseSpec, Simulation, SwitchingKind,
};
use nalgebra::{DMatrix, DVector};

/// Seeded instance: Gaussian regressors, iid uniform switching, identity map.
pub fn instance(n: usize, s: usize, len: usize, noise: NoiseSpec, seed: u64) -> Simulation {
    let map = FeatureMap::Identity { dim: n };
    let a = random_parameter_matrix(&map, s, derive_seed(seed, 0));
    let sigma = switching_generator(&SwitchingKind::IidUniform, len, s, derive_seed(seed, 1)).unwrap();
    let inputs = InputSequence::gaussian(&map, len, derive_seed(seed, 2));
    let noise = NoiseSpec {
        seed: derive_seed(seed, 3),
        ..noise
    };
    simulate(&a, &sigma, &inputs, &map, &noise).unwrap()
}

fn det(m: &[Vec<i64>]) -> i64 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|j| {
            let minor: Vec<Vec<i64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1 } else { -1 };
            sign * m[0][j] * det(&minor)
        })
        .sum()
}

/// Exact rank of a small integer matrix: the size of its largest nonzero
/// minor.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let (nr, nc) = (rows.len(), rows.first().map_or(0, Vec::len));
    (1..=nr.min(nc))
        .rev()
        .find(|&k| {
            (0..nr).combinations(k).any(|ri| {
                (0..nc).combinations(k).any(|ci| {
                    let sub: Vec<Vec<i64>> = ri.iter().map(|&i| ci.iter().map(|&j| rows[i][j]).collect()).collect();
                    det(&sub) != 0
                })
            })
        })
        .unwrap_or(0)
}

/// Smallest `m` such that every choice of `m` columns has rank `n`.
pub fn nu_oracle(x: &[Vec<i64>]) -> usize {
    let n = x.len();
    let len = x[0].len();
    (n..=len)
        .find(|&m| {
            (0..len).combinations(m).all(|idx| {
                let sub: Vec<Vec<i64>> = x.iter().map(|row| idx.iter().map(|&t| row[t]).collect()).collect();
                exact_rank(&sub) == n
            })
        })
        .expect("full row rank")
}

pub fn int_to_matrix(x: &[Vec<i64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j] as f64)
}

/// `inf_{w r-sparse} |w - v|_1` by enumerating supports.
pub fn sparse_distance(v: &[f64], r: usize) -> f64 {
    (0..v.len())
        .combinations(r)
        .map(|support| {
            (0..v.len())
                .filter(|t| !support.contains(t))
                .map(|t| v[t].abs())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Right side minus left side of the l1 concentration inequality, with the
/// `r` largest entries of `v` found by a full sort.
pub fn lemma1_gap_oracle(v: &[f64], vp: &[f64], r: usize) -> f64 {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap());
    let top = &order[..r];
    let diff: Vec<f64> = vp.iter().zip(v).map(|(a, b)| a - b).collect();
    let l1 = |w: &[f64]| w.iter().map(|x| x.abs()).sum::<f64>();
    let lhs = l1(&diff) - 2.0 * top.iter().map(|&t| diff[t].abs()).sum::<f64>();
    let rhs = l1(vp) - l1(v) + 2.0 * sparse_distance(v, r);
    rhs - lhs
}

/// Minimum-norm solution of `x_sub^T a = y_sub` when the columns of `x_sub`
/// are independent.
fn interpolate_independent(x_sub: &DMatrix<f64>, y_sub: &[f64]) -> Option<DVector<f64>> {
    let gram = x_sub.transpose() * x_sub;
    let chol = gram.cholesky()?;
    let w = chol.solve(&DVector::from_column_slice(y_sub));
    let a = x_sub * w;
    let ok = x_sub
        .column_iter()
        .zip(y_sub)
        .all(|(c, y)| (c.dot(&a) - y).abs() <= 1e-9 * (1.0 + y.abs()));
    ok.then_some(a)
}

/// LAD objective by vertex enumeration: some optimum interpolates `rank`
/// samples with independent regressors.
pub fn lad_oracle(x: &DMatrix<f64>, y: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let n = x.nrows();
    let objective = |a: &DVector<f64>| idx.iter().map(|&t| (y[t] - x.column(t).dot(a)).abs()).sum::<f64>();
    let mut best = objective(&DVector::zeros(n));
    for k in 1..=n.min(idx.len()) {
        for sub in idx.iter().copied().combinations(k) {
            let xs = DMatrix::from_fn(n, k, |i, j| x[(i, sub[j])]);
            let ys: Vec<f64> = sub.iter().map(|&t| y[t]).collect();
            if let Some(a) = interpolate_independent(&xs, &ys) {
                best = best.min(objective(&a));
            }
        }
    }
    best
}

/// Global LSM optimum: minimum over all labellings of the per-mode LAD sums.
pub fn lsm_oracle(x: &DMatrix<f64>, y: &[f64], s: usize) -> f64 {
    let len = y.len();
    let mut best = f64::INFINITY;
    for code in 0..s.pow(len as u32) {
        let mut c = code;
        let mut parts = vec![Vec::new(); s];
        for t in 0..len {
            parts[c % s].push(t);
            c /= s;
        }
        // Mode relabelling symmetry: require first appearances in order.
        let firsts: Vec<usize> = parts.iter().filter(|p| !p.is_empty()).map(|p| p[0]).collect();
        if firsts.windows(2).any(|w| w[0] > w[1]) || parts.iter().skip(firsts.len()).any(|p| !p.is_empty()) {
            continue;
        }
        let total: f64 = parts.iter().map(|p| lad_oracle(x, y, p)).sum();
        best = best.min(total);
    }
    best
}

/// Canonical assignment by exhaustive search: among labellings that pick a
/// minimal residual (up to the relative tie tolerance) per sample, maximise
/// the smallest mode size, then take the lexicographically smallest.
pub fn assignment_oracle(residuals: &[Vec<f64>], s: usize, tie_tol: f64) -> Vec<usize> {
    let allowed: Vec<Vec<usize>> = residuals
        .iter()
        .map(|row| {
            let min = row.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
            (0..s).filter(|&i| row[i].abs() <= min + tie_tol * (1.0 + min)).collect()
        })
        .collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for labels in allowed.iter().map(|a| a.iter().copied()).multi_cartesian_product() {
        let mut counts = vec![0usize; s];
        for &l in &labels {
            counts[l] += 1;
        }
        let k = *counts.iter().min().unwrap();
        let better = match &best {
            None => true,
            Some((bk, bl)) => k > *bk || (k == *bk && labels < *bl),
        };
        if better {
            best = Some((k, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

/// `g(Lambda)` by enumerating every assignment of samples to
/// `{unused, mode 1, .., mode s}` with exactly `nu` samples per mode.
pub fn g_oracle(x: &DMatrix<f64>, lambda: &DMatrix<f64>, nu: usize) -> f64 {
    let len = x.ncols();
    let s = lambda.ncols();
    let p: Vec<Vec<f64>> = (0..len)
        .map(|t| (0..s).map(|i| x.column(t).dot(&lambda.column(i)).abs()).collect())
        .collect();
    let mut best = f64::INFINITY;
    for code in 0..(s + 1).pow(len as u32) {
        let mut c = code;
        let mut counts = vec![0usize; s];
        let mut total = 0.0;
        for row in p.iter() {
            let l = c % (s + 1);
            c /= s + 1;
            if l > 0 {
                counts[l - 1] += 1;
                total += row[l - 1];
            }
        }
        if counts.iter().all(|&k| k == nu) {
            best = best.min(total);
        }
    }
    best
}

/// `min_{|I| = m} sqrt(lambda_min(X_I X_I^T))`.
pub fn d_hat_oracle(x: &DMatrix<f64>, m: usize) -> f64 {
    (0..x.ncols())
        .combinations(m)
        .map(|idx| {
            let xs = DMatrix::from_fn(x.nrows(), m, |i, j| x[(i, idx[j])]);
            let g = &xs * xs.transpose();
            g.symmetric_eigenvalues().min().max(0.0).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest fraction of `sum_t |x_t . eta|` carried by `r` samples, scanning
/// `steps` directions of the half circle (n = 2). A lower bound on the exact
/// single-mode ratio.
pub fn ratio_grid_n2(x: &DMatrix<f64>, r: usize, steps: usize) -> f64 {
    (0..steps)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / steps as f64;
            let eta = DVector::from_vec(vec![th.cos(), th.sin()]);
            let mut p: Vec<f64> = (0..x.ncols()).map(|t| x.column(t).dot(&eta).abs()).collect();
            let total: f64 = p.iter().sum();
            p.sort_by(|a, b| b.partial_cmp(a).unwrap());
            p[..r].iter().sum::<f64>() / total
        })
        .fold(0.0, f64::max)
}
