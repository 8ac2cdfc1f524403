//! Data-informativity quantities: the genericity index, concentration ratios
//! (certified upper bounds for a single mode, Monte Carlo lower estimates for
//! the switched case), `r*`, and the eigenvalue / l1 constants used by the
//! parametric error bounds.
//!
//! Several minimisations over the unit sphere are piecewise linear on the
//! cones of the hyperplane arrangement `{eta : x_t . eta = 0}`, so they are
//! attained on its extreme rays. When the number of rays is within budget
//! those quantities are computed exactly by enumerating the rays.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::comparability;
use crate::assign::{canonical_assignment, DEFAULT_TIE_TOL};
use crate::error::{LsmError, Result};
use crate::linalg::{binomial, gram_min_sqrt, orthogonal_ray, rank_above, select_columns, singular_values};
use crate::lp::{self, LpOutcome, StandardForm};
use crate::model::{derive_seed, Dataset, ParameterMatrix};

pub const DEFAULT_SUBSET_BUDGET: u128 = 2_000_000;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Relative inflation applied to LP optima reported as upper bounds, so that
/// rounding in the simplex cannot push a certified bound below the truth.
const OUTWARD: f64 = 1.0 + 1e-12;
const CUT_TOL: f64 = 1e-9;

fn budget_error(needed: u128, budget: u128, advice: &'static str) -> LsmError {
    LsmError::BudgetExceeded { needed, budget, advice }
}

fn check_full_row_rank(x: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    let sv = singular_values(x);
    let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let rank = sv.iter().filter(|&&v| v > rank_tol * smax).count();
    if smax == 0.0 || rank < x.nrows() {
        return Err(LsmError::NotFullRowRank { rank, n: x.nrows() });
    }
    Ok(smax)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genericity {
    pub nu: usize,
    /// A rank-deficient subset of size `nu - 1` (0-based sample indices),
    /// present whenever `nu > n`.
    pub witness: Option<Vec<usize>>,
}

/// Smallest `m` such that every `n x m` column submatrix of `x` has rank `n`.
///
/// Rank is decided by counting singular values above
/// `rank_tol * sigma_max(x)`, where `sigma_max` is that of the full matrix so
/// every subset is judged on the same absolute scale.
pub fn genericity_index(x: &DMatrix<f64>, rank_tol: f64, budget: u128) -> Result<Genericity> {
    let n = x.nrows();
    let len = x.ncols();
    let smax = check_full_row_rank(x, rank_tol)?;
    let threshold = rank_tol * smax;
    let mut spent: u128 = 0;
    let mut witness = None;
    for m in n..=len {
        let needed = binomial(len, m);
        if spent.saturating_add(needed) > budget {
            return Err(budget_error(
                spent.saturating_add(needed),
                budget,
                "reduce N or raise the subset budget",
            ));
        }
        let deficient = (0..len)
            .combinations(m)
            .find(|idx| rank_above(&select_columns(x, idx), threshold) < n);
        match deficient {
            Some(idx) => {
                spent += needed;
                witness = Some(idx);
            }
            None => return Ok(Genericity { nu: m, witness }),
        }
    }
    unreachable!("the full matrix has rank n")
}

/// Extreme rays (unit l2 normals) of the arrangement cut out by the columns
/// of `x`: one per `(n-1)`-subset spanning an `(n-1)`-dimensional space.
/// `None` when `C(N, n-1)` exceeds `budget`.
pub fn arrangement_rays(x: &DMatrix<f64>, budget: u128) -> Option<Vec<DVector<f64>>> {
    let n = x.nrows();
    let len = x.ncols();
    if n == 0 || n - 1 > len || binomial(len, n - 1) > budget {
        return None;
    }
    let subsets: Vec<Vec<usize>> = (0..len).combinations(n - 1).collect();
    let rays = subsets
        .par_iter()
        .filter_map(|idx| orthogonal_ray(x, idx, 1e-10))
        .collect();
    Some(rays)
}

/// Sorted (descending) absolute values of `x^T eta` and their l1 norm.
fn projections_desc(x: &DMatrix<f64>, eta: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut p: Vec<f64> = (0..x.ncols()).map(|t| x.column(t).dot(eta).abs()).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    let total = p.iter().sum();
    (p, total)
}

/// `ratio[r]` = (sum of the `r` largest entries of `sorted_desc`) / total.
fn concentration_curve(sorted_desc: &[f64], total: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(sorted_desc.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for v in sorted_desc {
        acc += v;
        out.push((acc / total).min(1.0));
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Maximises `c . eta` over `{eta : |x^T eta|_1 <= 1}` by cutting planes.
/// `cuts` holds sign patterns and is shared (and extended) across calls.
/// Returns the LP optimum and the final iterate.
fn max_linear_over_l1_ball(
    x: &DMatrix<f64>,
    c: &DVector<f64>,
    box_bound: f64,
    cuts: &mut Vec<Vec<f64>>,
) -> Result<(f64, DVector<f64>)> {
    let n = x.nrows();
    let len = x.ncols();
    loop {
        // Variables: eta+ (n), eta- (n), one slack per row.
        let rows = cuts.len() + 2 * n;
        let cols = 2 * n + rows;
        let mut a = Vec::with_capacity(rows);
        let mut b = Vec::with_capacity(rows);
        for (k, s) in cuts.iter().enumerate() {
            let mut row = vec![0.0; cols];
            for j in 0..n {
                let coef: f64 = (0..len).map(|t| s[t] * x[(j, t)]).sum();
                row[j] = coef;
                row[n + j] = -coef;
            }
            row[2 * n + k] = 1.0;
            a.push(row);
            b.push(1.0);
        }
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let k = a.len();
                let mut row = vec![0.0; cols];
                row[j] = sign;
                row[n + j] = -sign;
                row[2 * n + k] = 1.0;
                a.push(row);
                b.push(box_bound);
            }
        }
        let mut cost = vec![0.0; cols];
        for j in 0..n {
            cost[j] = -c[j];
            cost[n + j] = c[j];
        }
        let basis = (2 * n..cols).collect();
        let sol = match lp::solve(&StandardForm { a, b, c: cost, basis })? {
            LpOutcome::Optimal(sol) => sol,
            LpOutcome::Unbounded => unreachable!("box constraints bound the program"),
        };
        let eta = DVector::from_iterator(n, (0..n).map(|j| sol.x[j] - sol.x[n + j]));
        let proj: Vec<f64> = (0..len).map(|t| x.column(t).dot(&eta)).collect();
        let l1: f64 = proj.iter().map(|v| v.abs()).sum();
        if l1 <= 1.0 + CUT_TOL {
            return Ok((c.dot(&eta), eta));
        }
        cuts.push(proj.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect());
    }
}

/// Upper bound on `max_t sup_eta |x_t . eta| / |x^T eta|_1`, i.e. on the
/// single-mode concentration ratio at `r = 1`.
pub fn xi_bar_one(x: &DMatrix<f64>, rank_tol: f64) -> Result<f64> {
    check_full_row_rank(x, rank_tol)?;
    let n = x.nrows();
    let sv = singular_values(x);
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let box_bound = 2.0 / smin;
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let e = DVector::from_fn(n, |i, _| if i == j { sign } else { 0.0 });
            cuts.push(
                (0..x.ncols())
                    .map(|t| if x.column(t).dot(&e) >= 0.0 { 1.0 } else { -1.0 })
                    .collect(),
            );
        }
    }
    let mut best = 0.0f64;
    for t in 0..x.ncols() {
        let c = x.column(t).into_owned();
        if c.norm() == 0.0 {
            continue;
        }
        // The feasible set is symmetric, so maximising +x_t covers -x_t too.
        let (value, _) = max_linear_over_l1_ball(x, &c, box_bound, &mut cuts)?;
        best = best.max(value);
    }
    Ok((best * OUTWARD).min(1.0))
}

/// Certified upper bound `min(1, r * xi_bar_1)` on the single-mode ratio.
pub fn xi_single_mode_upper(x: &DMatrix<f64>, r: usize, rank_tol: f64) -> Result<f64> {
    if r > x.ncols() {
        return Err(LsmError::OutOfRange {
            name: "r",
            value: r,
            lo: 0,
            hi: x.ncols(),
        });
    }
    if r == 0 {
        return Ok(0.0);
    }
    Ok((r as f64 * xi_bar_one(x, rank_tol)?).min(1.0))
}

/// Exact single-mode ratio for one `r`: one epigraph LP per subset `T` with
/// `|T| = r` and sign pattern on `T` (first sign fixed by symmetry).
pub fn xi_single_mode_exact(x: &DMatrix<f64>, r: usize, rank_tol: f64, budget: u128) -> Result<f64> {
    let len = x.ncols();
    let n = x.nrows();
    if r > len {
        return Err(LsmError::OutOfRange {
            name: "r",
            value: r,
            lo: 0,
            hi: len,
        });
    }
    check_full_row_rank(x, rank_tol)?;
    if r == 0 {
        return Ok(0.0);
    }
    if r == len {
        return Ok(1.0);
    }
    let needed = binomial(len, r).saturating_mul(1u128 << (r - 1).min(100));
    if needed > budget {
        return Err(budget_error(needed, budget, "lower r or N for the exact ratio"));
    }

    // Variables: eta+ (n), eta- (n), e (N), slacks (1 + 2N).
    // Rows: sum e <= 1;  x_t.eta - e_t <= 0;  -x_t.eta - e_t <= 0.
    let rows = 1 + 2 * len;
    let cols = 2 * n + len + rows;
    let mut a = vec![vec![0.0; cols]; rows];
    for t in 0..len {
        a[0][2 * n + t] = 1.0;
        for j in 0..n {
            a[1 + t][j] = x[(j, t)];
            a[1 + t][n + j] = -x[(j, t)];
            a[1 + len + t][j] = -x[(j, t)];
            a[1 + len + t][n + j] = x[(j, t)];
        }
        a[1 + t][2 * n + t] = -1.0;
        a[1 + len + t][2 * n + t] = -1.0;
    }
    for (k, row) in a.iter_mut().enumerate() {
        row[2 * n + len + k] = 1.0;
    }
    let mut b = vec![0.0; rows];
    b[0] = 1.0;
    let basis: Vec<usize> = (2 * n + len..cols).collect();

    let tasks: Vec<(Vec<usize>, u64)> = (0..len)
        .combinations(r)
        .flat_map(|tset| (0..1u64 << (r - 1)).map(move |mask| (tset.clone(), mask)))
        .collect();
    let values = tasks
        .par_iter()
        .map(|(tset, mask)| -> Result<f64> {
            let mut c = DVector::zeros(n);
            for (k, &t) in tset.iter().enumerate() {
                let sign = if k > 0 && (mask >> (k - 1)) & 1 == 1 { -1.0 } else { 1.0 };
                c += x.column(t) * sign;
            }
            let mut cost = vec![0.0; cols];
            for j in 0..n {
                cost[j] = -c[j];
                cost[n + j] = c[j];
            }
            let problem = StandardForm {
                a: a.clone(),
                b: b.clone(),
                c: cost,
                basis: basis.clone(),
            };
            match lp::solve(&problem)? {
                LpOutcome::Optimal(sol) => Ok(-sol.objective),
                LpOutcome::Unbounded => Err(LsmError::Lp("epigraph program unbounded".into())),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(0.0f64, f64::max).min(1.0))
}

/// Lower estimate of the single-mode ratio curve (`r = 0..=N`): exact maxima
/// over arrangement rays when they fit in `budget`, otherwise over random
/// directions. Every value is attained by some `eta`, hence a valid lower
/// bound.
pub fn xi_single_mode_lower_curve(x: &DMatrix<f64>, samples: usize, seed: u64, budget: u128) -> Vec<f64> {
    let n = x.nrows();
    let directions = arrangement_rays(x, budget).unwrap_or_else(|| {
        (0..samples.max(1))
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
                DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) })
            })
            .collect()
    });
    directions
        .par_iter()
        .filter_map(|eta| {
            let (p, total) = projections_desc(x, eta);
            (total > 0.0).then(|| concentration_curve(&p, total))
        })
        .reduce(
            || vec![0.0; x.ncols() + 1],
            |a, b| a.iter().zip(&b).map(|(u, v)| u.max(*v)).collect(),
        )
}

/// Options for the Monte Carlo estimate of the switched concentration ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedXiOptions {
    pub samples: usize,
    pub seed: u64,
    /// Keep only pairs that are comparable at threshold `nu`.
    pub comparable_only: Option<usize>,
    /// Extra pairs, e.g. harvested from estimator runs.
    pub extra_pairs: Vec<(ParameterMatrix, ParameterMatrix)>,
    pub tie_tol: f64,
}

impl SwitchedXiOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        SwitchedXiOptions {
            samples,
            seed,
            comparable_only: None,
            extra_pairs: Vec::new(),
            tie_tol: DEFAULT_TIE_TOL,
        }
    }
}

fn data_scale(data: &Dataset) -> f64 {
    let ymax = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xmean = (0..data.len()).map(|t| data.regressor(t).norm()).sum::<f64>() / data.len() as f64;
    if xmean > 0.0 && ymax > 0.0 {
        ymax / xmean
    } else {
        1.0
    }
}

fn sample_pair(data: &Dataset, s: usize, scale: f64, seed: u64) -> (ParameterMatrix, ParameterMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n();
    let mut draw = |sd: f64| DMatrix::from_fn(n, s, |_, _| -> f64 { let z: f64 = StandardNormal.sample(&mut rng); sd * z });
    let a = draw(scale);
    // Alternate between independent pairs and local perturbations.
    let b = if seed % 2 == 0 { draw(scale) } else { &a + draw(scale * 1e-2) };
    (
        ParameterMatrix::new(a).expect("finite draw"),
        ParameterMatrix::new(b).expect("finite draw"),
    )
}

/// Monte Carlo lower estimate of the switched concentration ratio for every
/// `r = 0..=N`. Each pair contributes its exact inner supremum (the `r`
/// largest entries of `|phi(A) - phi(A')|`).
pub fn xi_switched_lower_curve(data: &Dataset, s: usize, opts: &SwitchedXiOptions) -> Result<Vec<f64>> {
    if opts.samples == 0 && opts.extra_pairs.is_empty() {
        return Err(LsmError::InvalidArgument("samples must be at least 1".into()));
    }
    let scale = data_scale(data);
    let len = data.len();
    let y_scale = 1.0 + data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let evaluate = |a: &ParameterMatrix, b: &ParameterMatrix| -> Result<Option<Vec<f64>>> {
        let pa = canonical_assignment(data, a, opts.tie_tol)?;
        let pb = canonical_assignment(data, b, opts.tie_tol)?;
        if let Some(nu) = opts.comparable_only {
            if !comparability(data, a, b, nu, opts.tie_tol)?.comparable {
                return Ok(None);
            }
        }
        let mut d: Vec<f64> = pa.phi.iter().zip(&pb.phi).map(|(u, v)| (u - v).abs()).collect();
        let total: f64 = d.iter().sum();
        if total <= 1e-12 * y_scale {
            return Ok(None);
        }
        d.sort_by(|u, v| v.total_cmp(u));
        Ok(Some(concentration_curve(&d, total)))
    };
    let sampled = (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let (a, b) = sample_pair(data, s, scale, derive_seed(opts.seed, k as u64));
            evaluate(&a, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    let harvested = opts
        .extra_pairs
        .par_iter()
        .map(|(a, b)| evaluate(a, b))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<f64>> = sampled.into_iter().chain(harvested).flatten().collect();
    if curves.is_empty() {
        return Err(LsmError::NoValidPairs);
    }
    let mut out = vec![0.0f64; len + 1];
    for c in &curves {
        for (o, v) in out.iter_mut().zip(c) {
            *o = (*o).max(*v);
        }
    }
    Ok(out)
}

pub fn xi_switched_lower(data: &Dataset, s: usize, r: usize, opts: &SwitchedXiOptions) -> Result<f64> {
    if r > data.len() {
        return Err(LsmError::OutOfRange {
            name: "r",
            value: r,
            lo: 0,
            hi: data.len(),
        });
    }
    Ok(xi_switched_lower_curve(data, s, opts)?[r])
}

/// Monotone envelopes that keep each curve a valid bound: an upper bound at
/// `r` also bounds every smaller `r`, a lower bound every larger one.
pub fn isotonic_clamp(upper: &[f64], lower: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut up = upper.to_vec();
    for i in (0..up.len().saturating_sub(1)).rev() {
        up[i] = up[i].min(up[i + 1]);
    }
    let mut lo = lower.to_vec();
    for i in 1..lo.len() {
        lo[i] = lo[i].max(lo[i - 1]);
    }
    if let Some(v) = up.first_mut() {
        *v = 0.0;
    }
    if let Some(v) = lo.first_mut() {
        *v = 0.0;
    }
    (up, lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RStar {
    /// Largest `r` whose certified upper ratio is below 1/2.
    pub lower: usize,
    /// Largest `r` whose lower estimate is below 1/2 (optimistic).
    pub upper: usize,
}

/// `r*` bracket from ratio curves indexed by `r = 0..=N`.
pub fn r_star(xi_upper: &[f64], xi_lower: &[f64]) -> RStar {
    let (up, lo) = isotonic_clamp(xi_upper, xi_lower);
    let last_below = |c: &[f64]| c.iter().rposition(|&v| v < 0.5).unwrap_or(0);
    let upper = last_below(&lo);
    RStar {
        lower: last_below(&up).min(upper),
        upper,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower_certified: f64,
    pub upper_estimate: f64,
    /// The upper value is exact (attained at an arrangement ray, all rays
    /// enumerated).
    pub upper_exact: bool,
}

/// `min over |I| = m of lambda_min^{1/2}(X_I X_I^T)`.
pub fn d_hat(x: &DMatrix<f64>, m: usize, budget: u128) -> Result<f64> {
    let len = x.ncols();
    if m == 0 || m > len {
        return Err(LsmError::OutOfRange {
            name: "m",
            value: m,
            lo: 1,
            hi: len,
        });
    }
    let needed = binomial(len, m);
    if needed > budget {
        return Err(budget_error(needed, budget, "lower m or N"));
    }
    Ok((0..len)
        .combinations(m)
        .par_bridge()
        .map(|idx| gram_min_sqrt(x, &idx))
        .reduce(|| f64::INFINITY, f64::min))
}

fn sum_smallest(x: &DMatrix<f64>, eta: &DVector<f64>, m: usize) -> f64 {
    let (p, _) = projections_desc(x, eta);
    p[p.len() - m..].iter().sum()
}

/// Greedy vertex walk: from `eta`, repeatedly move to the ray orthogonal to
/// the `n - 1` currently smallest projections while that improves `f`.
fn vertex_descent(
    x: &DMatrix<f64>,
    mut eta: DVector<f64>,
    f: &dyn Fn(&DVector<f64>) -> f64,
) -> f64 {
    let n = x.nrows();
    let mut best = f(&eta);
    for _ in 0..100 {
        let mut order: Vec<usize> = (0..x.ncols()).collect();
        order.sort_by(|&a, &b| {
            x.column(a)
                .dot(&eta)
                .abs()
                .total_cmp(&x.column(b).dot(&eta).abs())
                .then(a.cmp(&b))
        });
        let Some(ray) = orthogonal_ray(x, &order[..n - 1], 1e-10) else {
            break;
        };
        let value = f(&ray);
        if value < best - 1e-15 * (1.0 + best) {
            best = value;
            eta = ray;
        } else {
            break;
        }
    }
    best
}

fn random_unit(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 })
    }
}

/// Minimum over `directions` and `restarts` descended random starts.
fn minimise_on_rays(
    x: &DMatrix<f64>,
    rays: Option<Vec<DVector<f64>>>,
    restarts: usize,
    seed: u64,
    f: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
) -> (f64, bool) {
    match rays {
        Some(rays) if !rays.is_empty() => (
            rays.par_iter().map(f).reduce(|| f64::INFINITY, f64::min),
            true,
        ),
        _ => {
            let best = (0..restarts.max(1))
                .into_par_iter()
                .map(|k| vertex_descent(x, random_unit(x.nrows(), derive_seed(seed, k as u64)), f))
                .reduce(|| f64::INFINITY, f64::min);
            (best, false)
        }
    }
}

/// Bracket on `gamma_m = inf_{|eta|_2 = 1, |I| >= m} |X_I^T eta|_1`.
pub fn gamma_m(x: &DMatrix<f64>, m: usize, restarts: usize, seed: u64, budget: u128) -> Result<Bracket> {
    let lower = d_hat(x, m, budget)?;
    let f = |eta: &DVector<f64>| sum_smallest(x, eta, m) / eta.norm();
    let (upper, exact) = minimise_on_rays(x, arrangement_rays(x, budget), restarts, seed, &f);
    Ok(Bracket {
        lower_certified: lower,
        upper_estimate: upper.max(lower),
        upper_exact: exact,
    })
}

/// Bracket on `lambda = inf_{|eta|_1 = 1} |X^T eta|_1`.
pub fn lambda_l1(x: &DMatrix<f64>, restarts: usize, seed: u64, budget: u128) -> Result<Bracket> {
    check_full_row_rank(x, DEFAULT_RANK_TOL)?;
    let n = x.nrows();
    let sv = singular_values(x);
    let smin = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let lower = smin / (n as f64).sqrt();
    // The ratio is also piecewise linear across coordinate hyperplanes, so
    // the rays of the arrangement augmented by the identity cover its minima.
    let mut augmented = DMatrix::zeros(n, x.ncols() + n);
    augmented.columns_mut(0, x.ncols()).copy_from(x);
    augmented.columns_mut(x.ncols(), n).fill_with_identity();
    let f = |eta: &DVector<f64>| {
        let num: f64 = (0..x.ncols()).map(|t| x.column(t).dot(eta).abs()).sum();
        num / eta.lp_norm(1)
    };
    let (upper, exact) = minimise_on_rays(&augmented, arrangement_rays(&augmented, budget), restarts, seed, &f);
    Ok(Bracket {
        lower_certified: lower,
        upper_estimate: upper.max(lower),
        upper_exact: exact,
    })
}

/// A reported value together with whether it is a rigorous statement about
/// the data (`certified`) or an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub value: T,
    pub certified: bool,
    pub note: String,
}

impl<T> Tagged<T> {
    fn new(value: T, certified: bool, note: impl Into<String>) -> Self {
        Tagged {
            value,
            certified,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRecord {
    pub r: usize,
    pub upper_bound: Tagged<f64>,
    pub lower_estimate: Tagged<f64>,
    pub exact: Option<Tagged<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub lower_certified: Tagged<f64>,
    pub upper_estimate: Tagged<f64>,
}

impl BracketReport {
    fn from_bracket(b: Bracket, lower_note: &str) -> Self {
        BracketReport {
            lower_certified: Tagged::new(b.lower_certified, true, lower_note),
            upper_estimate: Tagged::new(
                b.upper_estimate,
                b.upper_exact,
                if b.upper_exact {
                    "exact: minimum over all arrangement rays"
                } else {
                    "local search estimate"
                },
            ),
        }
    }
}

/// Which side of the switched ratio bracket downstream bounds use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSide {
    CertifiedUpper,
    McLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub s: usize,
    pub n_samples: usize,
    pub nu_n: Option<Tagged<usize>>,
    /// 1-based sample indices of a rank-deficient `(nu_n - 1)`-subset.
    pub nu_witness: Option<Vec<usize>>,
    pub xi_bar_1: Option<Tagged<f64>>,
    pub xi_single_mode: Vec<XiRecord>,
    /// Upper ratio curve for the system at hand (`r = 0..=N`).
    pub xi_upper: Tagged<Vec<f64>>,
    /// Monte Carlo lower curve for the switched ratio (`r = 0..=N`).
    pub xi_switched_lower: Option<Tagged<Vec<f64>>>,
    pub xi_side: XiSide,
    pub r_star_lower: Tagged<usize>,
    pub r_star_upper: Tagged<usize>,
    pub gamma_m: Option<GammaReport>,
    pub d_hat: Option<Tagged<f64>>,
    pub d_upper_estimate: Option<Tagged<f64>>,
    pub lambda_l1: Option<BracketReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub m: usize,
    #[serde(flatten)]
    pub bracket: BracketReport,
}

impl MetricsReport {
    /// Ratio value and side used for bounds at `r`. Switched systems use the
    /// Monte Carlo lower curve throughout; a single mode uses the certified
    /// upper curve where it is below 1/2, else the Monte Carlo estimate.
    pub fn xi_for_bounds(&self, r: usize) -> Option<(f64, XiSide)> {
        let upper = *self.xi_upper.value.get(r)?;
        if self.xi_side == XiSide::CertifiedUpper && upper < 0.5 {
            return Some((upper, XiSide::CertifiedUpper));
        }
        match &self.xi_switched_lower {
            Some(c) => c.value.get(r).map(|&v| (v, XiSide::McLower)),
            None => Some((upper, XiSide::CertifiedUpper)),
        }
    }

    /// Certified upper ratio at `r`, when it is below 1/2.
    pub fn certified_xi(&self, r: usize) -> Option<f64> {
        self.xi_upper.value.get(r).copied().filter(|&u| u < 0.5)
    }

    pub fn nu(&self) -> Option<usize> {
        self.nu_n.as_ref().map(|t| t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricFlags {
    pub genericity: bool,
    pub xi_single_mode: bool,
    pub xi_exact: bool,
    pub xi_switched: bool,
    pub gamma: bool,
    pub lambda: bool,
}

impl Default for MetricFlags {
    fn default() -> Self {
        MetricFlags {
            genericity: true,
            xi_single_mode: true,
            xi_exact: false,
            xi_switched: true,
            gamma: true,
            lambda: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub enable: MetricFlags,
    pub rank_tol: f64,
    pub subset_budget: u128,
    pub xi_samples: usize,
    pub restarts: usize,
    /// Values of `r` reported individually; `None` means `0..=N`.
    pub r_grid: Option<Vec<usize>>,
    /// Subset size for `gamma_m`; defaults to the genericity index.
    pub gamma_m: Option<usize>,
    pub comparable_only: bool,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            enable: MetricFlags::default(),
            rank_tol: DEFAULT_RANK_TOL,
            subset_budget: DEFAULT_SUBSET_BUDGET,
            xi_samples: 2000,
            restarts: 20,
            r_grid: None,
            gamma_m: None,
            comparable_only: false,
            seed: 0,
        }
    }
}

/// Computes every enabled metric. `extra_pairs` are added to the Monte Carlo
/// ratio estimate.
pub fn compute_metrics(
    data: &Dataset,
    s: usize,
    cfg: &MetricsConfig,
    extra_pairs: Vec<(ParameterMatrix, ParameterMatrix)>,
) -> Result<MetricsReport> {
    if s == 0 {
        return Err(LsmError::InvalidArgument("s must be at least 1".into()));
    }
    let x = data.x();
    let len = data.len();
    check_full_row_rank(x, cfg.rank_tol)?;
    let grid: Vec<usize> = match &cfg.r_grid {
        Some(g) => {
            if let Some(&bad) = g.iter().find(|&&r| r > len) {
                return Err(LsmError::OutOfRange {
                    name: "r_grid",
                    value: bad,
                    lo: 0,
                    hi: len,
                });
            }
            g.clone()
        }
        None => (0..=len).collect(),
    };

    let genericity = if cfg.enable.genericity {
        Some(genericity_index(x, cfg.rank_tol, cfg.subset_budget)?)
    } else {
        None
    };
    let nu = genericity.as_ref().map(|g| g.nu);

    let mut xi_bar = None;
    let mut xi_single_mode = Vec::new();
    let mut single_upper = None;
    if cfg.enable.xi_single_mode {
        let bar = xi_bar_one(x, cfg.rank_tol)?;
        let upper: Vec<f64> = (0..=len).map(|r| (r as f64 * bar).min(1.0)).collect();
        let lower = xi_single_mode_lower_curve(x, cfg.xi_samples, derive_seed(cfg.seed, 1), cfg.subset_budget);
        let (upper, lower) = isotonic_clamp(&upper, &lower);
        for &r in &grid {
            let exact = if cfg.enable.xi_exact {
                match xi_single_mode_exact(x, r, cfg.rank_tol, cfg.subset_budget) {
                    Ok(v) => Some(Tagged::new(v, true, "exact: one LP per subset and sign pattern")),
                    Err(e) if e.is_budget() => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            xi_single_mode.push(XiRecord {
                r,
                upper_bound: Tagged::new(upper[r], true, "r times the cutting-plane bound at r = 1"),
                lower_estimate: Tagged::new(lower[r], true, "attained by an explicit direction"),
                exact,
            });
        }
        xi_bar = Some(Tagged::new(bar, true, "cutting-plane LP optimum, rounded outward"));
        single_upper = Some(upper);
    }

    let switched = if cfg.enable.xi_switched {
        let mut opts = SwitchedXiOptions::new(cfg.xi_samples, derive_seed(cfg.seed, 2));
        opts.extra_pairs = extra_pairs;
        if cfg.comparable_only {
            opts.comparable_only = nu;
        }
        match xi_switched_lower_curve(data, s, &opts) {
            Ok(c) => Some(c),
            Err(LsmError::NoValidPairs) if cfg.comparable_only => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    // For s > 1 the only certified statement is the trivial xi_r <= 1.
    let (xi_upper, xi_side) = match (&single_upper, s) {
        (Some(u), 1) => (
            Tagged::new(u.clone(), true, "single-mode cutting-plane bound"),
            XiSide::CertifiedUpper,
        ),
        _ => {
            let trivial: Vec<f64> = (0..=len).map(|r| if r == 0 { 0.0 } else { 1.0 }).collect();
            (
                Tagged::new(trivial, true, "trivial bound; no certificate for switched ratios"),
                XiSide::McLower,
            )
        }
    };
    let lower_curve = match (&switched, s, &single_upper) {
        (Some(c), _, _) => c.clone(),
        (None, 1, Some(_)) => xi_single_mode_lower_curve(x, cfg.xi_samples, derive_seed(cfg.seed, 1), cfg.subset_budget),
        _ => (0..=len).map(|r| if r == len { 1.0 } else { 0.0 }).collect(),
    };
    let rs = r_star(&xi_upper.value, &lower_curve);

    let (gamma, d_hat_value, d_upper) = if cfg.enable.gamma {
        let m = cfg.gamma_m.or(nu).unwrap_or(data.n());
        let g = gamma_m(x, m, cfg.restarts, derive_seed(cfg.seed, 3), cfg.subset_budget)?;
        let d_m = nu.unwrap_or(m);
        let (dh, du) = if d_m == m {
            (g.lower_certified, g)
        } else {
            let gd = gamma_m(x, d_m, cfg.restarts, derive_seed(cfg.seed, 4), cfg.subset_budget)?;
            (gd.lower_certified, gd)
        };
        (
            Some(GammaReport {
                m,
                bracket: BracketReport::from_bracket(g, "minimum Gram eigenvalue root over m-subsets"),
            }),
            Some(Tagged::new(dh, true, "minimum Gram eigenvalue root over nu-subsets")),
            Some(Tagged::new(
                du.upper_estimate,
                du.upper_exact,
                "single-column perturbations; equals gamma at m = nu",
            )),
        )
    } else {
        (None, None, None)
    };

    let lambda = if cfg.enable.lambda {
        Some(BracketReport::from_bracket(
            lambda_l1(x, cfg.restarts, derive_seed(cfg.seed, 5), cfg.subset_budget)?,
            "sigma_min / sqrt(n)",
        ))
    } else {
        None
    };

    Ok(MetricsReport {
        n: data.n(),
        s,
        n_samples: len,
        nu_n: genericity
            .as_ref()
            .map(|g| Tagged::new(g.nu, true, "full subset enumeration")),
        nu_witness: genericity.and_then(|g| g.witness).map(|w| w.iter().map(|t| t + 1).collect()),
        xi_bar_1: xi_bar,
        xi_single_mode,
        xi_upper,
        xi_switched_lower: switched.map(|c| Tagged::new(c, false, "Monte Carlo lower estimate")),
        xi_side,
        r_star_lower: Tagged::new(rs.lower, true, "largest r with certified upper ratio below 1/2"),
        r_star_upper: Tagged::new(rs.upper, false, "largest r with estimated ratio below 1/2"),
        gamma_m: gamma,
        d_hat: d_hat_value,
        d_upper_estimate: d_upper,
        lambda_l1: lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(n: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(n, data.len() / n, data)
    }

    #[test]
    fn genericity_examples() {
        let x = cols(2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(genericity_index(&x, 1e-10, DEFAULT_SUBSET_BUDGET).unwrap().nu, 2);
        let dup = cols(2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let g = genericity_index(&dup, 1e-10, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(g.nu, 3);
        assert_eq!(g.witness, Some(vec![0, 2]));
    }

    #[test]
    fn genericity_rejects_rank_deficient() {
        let x = cols(2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(
            genericity_index(&x, 1e-10, DEFAULT_SUBSET_BUDGET),
            Err(LsmError::NotFullRowRank { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn genericity_budget() {
        let x = DMatrix::from_fn(2, 40, |i, j| ((i + 1) * (j + 1)) as f64 + (j as f64).sin());
        assert!(genericity_index(&x, 1e-10, 10).unwrap_err().is_budget());
    }

    #[test]
    fn constant_regressor_ratio() {
        let x = DMatrix::from_element(1, 5, 2.0);
        for r in 0..=5 {
            let up = xi_single_mode_upper(&x, r, 1e-10).unwrap();
            assert!((up - r as f64 / 5.0).abs() < 1e-9, "r = {r}: {up}");
            let ex = xi_single_mode_exact(&x, r, 1e-10, 1_000_000).unwrap();
            assert!((ex - r as f64 / 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_ratio_is_one() {
        let x = DMatrix::<f64>::identity(2, 2);
        assert!((xi_single_mode_upper(&x, 1, 1e-10).unwrap() - 1.0).abs() < 1e-12);
        assert!((xi_single_mode_exact(&x, 1, 1e-10, 100).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn r_star_examples() {
        let up = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        assert_eq!(r_star(&up, &up), RStar { lower: 1, upper: 1 });
        let ones = [0.0, 1.0, 1.0];
        assert_eq!(r_star(&ones, &ones).upper, 0);
    }

    #[test]
    fn clamp_keeps_bounds_valid() {
        let (u, l) = isotonic_clamp(&[0.0, 0.6, 0.4, 0.9], &[0.0, 0.3, 0.2, 0.5]);
        assert_eq!(u, vec![0.0, 0.4, 0.4, 0.9]);
        assert_eq!(l, vec![0.0, 0.3, 0.3, 0.5]);
    }

    #[test]
    fn identity_gamma_and_lambda() {
        let x = DMatrix::<f64>::identity(2, 2);
        let g = gamma_m(&x, 2, 5, 0, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((g.lower_certified - 1.0).abs() < 1e-12);
        assert!((g.upper_estimate - 1.0).abs() < 1e-12);
        let l = lambda_l1(&x, 5, 0, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((l.lower_certified - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((l.upper_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d_hat_duplicate_column() {
        let x = cols(2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(d_hat(&x, 2, DEFAULT_SUBSET_BUDGET).unwrap(), 0.0);
        let id = DMatrix::<f64>::identity(2, 2);
        assert!((d_hat(&id, 2, DEFAULT_SUBSET_BUDGET).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn switched_ratio_endpoints() {
        let x = DMatrix::from_fn(1, 6, |_, t| 1.0 + t as f64);
        let y = DVector::from_fn(6, |t, _| (t as f64).cos());
        let data = Dataset::new(x, y, None).unwrap();
        let curve = xi_switched_lower_curve(&data, 2, &SwitchedXiOptions::new(50, 3)).unwrap();
        assert_eq!(curve[0], 0.0);
        assert_eq!(curve[6], 1.0);
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
    }
}
