//! The least sum-of-minimums estimator: minimise
//! `J(A) = sum_t min_i |y_t - x_t . a_i|` over `n x s` parameter matrices.
//!
//! Two solvers are provided. [`lsm_alternating`] is a k-regression style
//! heuristic (assign samples to their best mode, refit every mode by exact
//! LAD, repeat) with random multi-start. [`lsm_bruteforce`] enumerates every
//! labelling up to relabelling and solves the per-mode LAD problems, giving
//! the exact optimum on small instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::{canonical_assignment, cost, AssignmentResult, DEFAULT_TIE_TOL};
use crate::error::{LsmError, Result};
use crate::flow::min_cost_assignment;
use crate::linalg::{interpolate, rank_above, select_columns};
use crate::lp::{self, LpOutcome, StandardForm};
use crate::model::{derive_seed, Dataset, ParameterMatrix};

/// Result of a single least-absolute-deviation fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LadFit {
    pub a: DVector<f64>,
    pub objective: f64,
    /// The minimiser may not be unique (flat optimal face or rank-deficient
    /// regressors); `a` is one optimal vertex.
    pub degenerate: bool,
}

/// Exact LAD regression `min_a |y_sub - x_sub^T a|_1` by linear programming.
///
/// `x_sub` is `n x k` with one regressor per column.
pub fn lad_regression(x_sub: &DMatrix<f64>, y_sub: &[f64]) -> Result<LadFit> {
    let n = x_sub.nrows();
    let k = x_sub.ncols();
    if k == 0 {
        return Err(LsmError::EmptyMode);
    }
    if y_sub.len() != k {
        return Err(LsmError::DimensionMismatch(format!(
            "{k} regressors but {} outputs",
            y_sub.len()
        )));
    }
    if x_sub.iter().chain(y_sub.iter()).any(|v| !v.is_finite()) {
        return Err(LsmError::NonFinite("LAD data"));
    }

    // Variables: a+ (n), a- (n), e+ (k), e- (k).
    let cols = 2 * n + 2 * k;
    let mut a = Vec::with_capacity(k);
    let mut b = Vec::with_capacity(k);
    let mut basis = Vec::with_capacity(k);
    for t in 0..k {
        let sign = if y_sub[t] >= 0.0 { 1.0 } else { -1.0 };
        let mut row = vec![0.0; cols];
        for j in 0..n {
            row[j] = sign * x_sub[(j, t)];
            row[n + j] = -sign * x_sub[(j, t)];
        }
        row[2 * n + t] = sign;
        row[2 * n + k + t] = -sign;
        a.push(row);
        b.push(sign * y_sub[t]);
        basis.push(if sign > 0.0 { 2 * n + t } else { 2 * n + k + t });
    }
    let mut c = vec![0.0; cols];
    c[2 * n..].iter_mut().for_each(|v| *v = 1.0);
    let problem = StandardForm { a, b, c, basis };
    let sol = match lp::solve(&problem)? {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Unbounded => return Err(LsmError::Lp("LAD program reported unbounded".into())),
    };
    let raw = DVector::from_iterator(n, (0..n).map(|j| sol.x[j] - sol.x[n + j]));
    let objective_of = |a: &DVector<f64>| -> f64 {
        (0..k)
            .map(|t| (y_sub[t] - x_sub.column(t).dot(a)).abs())
            .sum()
    };
    let raw_obj = objective_of(&raw);

    let y_scale = 1.0 + y_sub.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let x_scale = x_sub.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let full_rank = rank_above(x_sub, 1e-10 * x_scale.max(f64::MIN_POSITIVE)) == n;

    // Re-solve the interpolation conditions of the optimal vertex directly;
    // this removes the rounding accumulated over the pivots.
    let zero_set: Vec<usize> = (0..k)
        .filter(|&t| (y_sub[t] - x_sub.column(t).dot(&raw)).abs() <= 1e-9 * y_scale)
        .collect();
    let mut best = raw;
    let mut best_obj = raw_obj;
    if full_rank && zero_set.len() >= n {
        let xz = select_columns(x_sub, &zero_set);
        let yz: Vec<f64> = zero_set.iter().map(|&t| y_sub[t]).collect();
        if let Some(polished) = interpolate(&xz, &yz, 1e-10) {
            let obj = objective_of(&polished);
            if obj <= best_obj + 1e-9 * (1.0 + best_obj) {
                best = polished;
                best_obj = obj;
            }
        }
    }
    Ok(LadFit {
        a: best,
        objective: best_obj,
        degenerate: sol.dual_degenerate || !full_rank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyModePolicy {
    ReseedRandomPoint,
    #[default]
    ReseedWorstResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    #[default]
    Heuristic,
    ExactBruteforce,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub cost_tol: f64,
    pub tie_tol: f64,
    pub empty_mode_policy: EmptyModePolicy,
    pub seed: u64,
    pub mode: EstimatorMode,
    /// Largest admissible `s^N` for the brute-force oracle.
    pub bruteforce_budget: u128,
    /// After the alternating iteration stalls, try moving single samples
    /// between modes before declaring convergence.
    pub local_search: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            restarts: 20,
            max_iters: 100,
            cost_tol: 1e-10,
            tie_tol: DEFAULT_TIE_TOL,
            empty_mode_policy: EmptyModePolicy::default(),
            seed: 0,
            mode: EstimatorMode::Heuristic,
            bruteforce_budget: 1_000_000,
            local_search: true,
        }
    }
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(LsmError::InvalidArgument(
                "restarts and max_iters must be positive".into(),
            ));
        }
        if !(self.cost_tol > 0.0) || !(self.tie_tol >= 0.0) {
            return Err(LsmError::InvalidArgument(
                "cost_tol must be > 0 and tie_tol >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    IterLimit,
    OracleExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub a_hat: ParameterMatrix,
    pub cost: f64,
    pub assignment: AssignmentResult,
    /// Cost after every iteration of the winning restart.
    pub trajectory: Vec<f64>,
    pub status: SolverStatus,
    pub restarts_used: usize,
    /// Restart that produced `a_hat` (0 for the oracle).
    pub best_restart: usize,
    /// Per-restart cost trajectories, in restart order.
    pub traces: Vec<Vec<f64>>,
    /// Distinct column sets found at the optimal cost (including `a_hat`).
    pub distinct_optima: Vec<ParameterMatrix>,
    /// Modes that received no sample in the optimal labelling (oracle only).
    pub empty_modes: Vec<usize>,
}

/// Minimum-cost matching of the columns of `other` to those of `reference`
/// under Euclidean distance: returns `pi` with `other[pi[i]]` matched to
/// `reference[i]`, and the total distance `sum_i |reference_i - other_pi(i)|_2`.
pub fn match_columns(reference: &ParameterMatrix, other: &ParameterMatrix) -> (Vec<usize>, f64) {
    let s = reference.s();
    let cost: Vec<Vec<f64>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| (reference.matrix().column(i) - other.matrix().column(j)).norm())
                .collect()
        })
        .collect();
    min_cost_assignment(&cost)
}

/// Whether two matrices have the same column set up to `tol` in matched
/// column distance.
pub fn same_column_set(a: &ParameterMatrix, b: &ParameterMatrix, tol: f64) -> bool {
    a.s() == b.s() && a.n() == b.n() && match_columns(a, b).1 <= tol
}

fn push_distinct(found: &mut Vec<ParameterMatrix>, candidate: &ParameterMatrix) {
    let scale = 1.0 + candidate.matrix().abs().max();
    if !found
        .iter()
        .any(|f| same_column_set(f, candidate, 1e-8 * scale))
    {
        found.push(candidate.clone());
    }
}

fn fit_mode(data: &Dataset, members: &[usize]) -> Result<DVector<f64>> {
    let xs = select_columns(data.x(), members);
    let ys: Vec<f64> = members.iter().map(|&t| data.y()[t]).collect();
    Ok(lad_regression(&xs, &ys)?.a)
}

/// Minimum-norm parameter vector that interpolates sample `t` exactly.
fn interpolating_column(data: &Dataset, t: usize) -> DVector<f64> {
    let xt = data.regressor(t).into_owned();
    let nrm2 = xt.norm_squared();
    if nrm2 == 0.0 {
        DVector::zeros(data.n())
    } else {
        xt * (data.y()[t] / nrm2)
    }
}

/// First single-sample relabelling (in sample, then mode order) whose refitted
/// modes lower the cost by more than `cost_tol`.
fn improving_move(
    data: &Dataset,
    a: &ParameterMatrix,
    current: f64,
    cfg: &EstimatorConfig,
) -> Result<Option<(ParameterMatrix, f64)>> {
    let assignment = canonical_assignment(data, a, cfg.tie_tol)?;
    let s = a.s();
    for t in 0..data.len() {
        let from = assignment.sigma[t];
        let source: Vec<usize> = assignment.partition[from].iter().copied().filter(|&u| u != t).collect();
        for to in (0..s).filter(|&j| j != from) {
            let mut target = assignment.partition[to].clone();
            let pos = target.partition_point(|&u| u < t);
            target.insert(pos, t);
            let mut candidate = a.clone();
            if !source.is_empty() {
                candidate.set_column(from, &fit_mode(data, &source)?);
            }
            candidate.set_column(to, &fit_mode(data, &target)?);
            let c = cost(data, &candidate)?;
            if c < current - cfg.cost_tol {
                return Ok(Some((candidate, c)));
            }
        }
    }
    Ok(None)
}

struct RestartOutcome {
    a: ParameterMatrix,
    cost: f64,
    trace: Vec<f64>,
    converged: bool,
}

fn run_restart(
    data: &Dataset,
    s: usize,
    cfg: &EstimatorConfig,
    restart: usize,
) -> Result<RestartOutcome> {
    let len = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, restart as u64));

    let mut a = ParameterMatrix::zeros(data.n(), s);
    if restart % 2 == 0 {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        for i in 0..s {
            let mut block: Vec<usize> = order[i * len / s..(i + 1) * len / s].to_vec();
            block.sort_unstable();
            let col = if block.is_empty() {
                interpolating_column(data, order[rng.random_range(0..len)])
            } else {
                fit_mode(data, &block)?
            };
            a.set_column(i, &col);
        }
    } else {
        // Each column interpolates a few random samples, so a mode can start
        // on a small group (e.g. a single outlier) that a partition would dilute.
        let n = data.n();
        for i in 0..s {
            let pick = rand::seq::index::sample(&mut rng, len, n.min(len)).into_vec();
            let xs = select_columns(data.x(), &pick);
            let ys: Vec<f64> = pick.iter().map(|&t| data.y()[t]).collect();
            let col = interpolate(&xs, &ys, 1e-10).unwrap_or_else(|| interpolating_column(data, pick[0]));
            a.set_column(i, &col);
        }
    }

    let mut current = cost(data, &a)?;
    let mut trace = vec![current];
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let assignment = canonical_assignment(data, &a, cfg.tie_tol)?;
        let mut next = a.clone();
        let mut worst: Vec<usize> = (0..len).collect();
        worst.sort_by(|&p, &q| {
            assignment.phi[q]
                .abs()
                .total_cmp(&assignment.phi[p].abs())
                .then(p.cmp(&q))
        });
        let mut reseeded = 0;
        for (i, members) in assignment.partition.iter().enumerate() {
            let col = if members.is_empty() {
                let t = match cfg.empty_mode_policy {
                    EmptyModePolicy::ReseedWorstResidual => worst[reseeded.min(len - 1)],
                    EmptyModePolicy::ReseedRandomPoint => rng.random_range(0..len),
                };
                reseeded += 1;
                interpolating_column(data, t)
            } else {
                fit_mode(data, members)?
            };
            next.set_column(i, &col);
        }
        let next_cost = cost(data, &next)?;
        assert!(
            next_cost <= current + 1e-9 * (1.0 + current),
            "alternating step increased the cost: {current} -> {next_cost}"
        );
        trace.push(next_cost);
        a = next;
        let decrease = current - next_cost;
        current = next_cost;
        if decrease < cfg.cost_tol {
            if cfg.local_search {
                if let Some((moved, moved_cost)) = improving_move(data, &a, current, cfg)? {
                    trace.push(moved_cost);
                    a = moved;
                    current = moved_cost;
                    continue;
                }
            }
            converged = true;
            break;
        }
    }
    Ok(RestartOutcome {
        a,
        cost: current,
        trace,
        converged,
    })
}

/// Alternating minimisation with random multi-start. `s` is the number of
/// modes.
pub fn lsm_alternating(data: &Dataset, s: usize, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    if s == 0 {
        return Err(LsmError::InvalidArgument("s must be at least 1".into()));
    }
    if data.len() < s {
        return Err(LsmError::InvalidArgument(format!(
            "N = {} is smaller than s = {s}",
            data.len()
        )));
    }

    if s == 1 {
        let all: Vec<usize> = (0..data.len()).collect();
        let fit = fit_mode(data, &all)?;
        let a_hat = ParameterMatrix::new(DMatrix::from_column_slice(data.n(), 1, fit.as_slice()))?;
        let assignment = canonical_assignment(data, &a_hat, cfg.tie_tol)?;
        let c = assignment.cost;
        return Ok(EstimateResult {
            distinct_optima: vec![a_hat.clone()],
            a_hat,
            cost: c,
            assignment,
            trajectory: vec![c],
            status: SolverStatus::Converged,
            restarts_used: 1,
            best_restart: 0,
            traces: vec![vec![c]],
            empty_modes: Vec::new(),
        });
    }

    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(data, s, cfg, r))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.cost < outcomes[best].cost {
            best = r;
        }
    }
    let best_cost = outcomes[best].cost;
    let mut distinct = vec![outcomes[best].a.clone()];
    for o in &outcomes {
        if o.cost <= best_cost + 1e-9 * (1.0 + best_cost) {
            push_distinct(&mut distinct, &o.a);
        }
    }
    let a_hat = outcomes[best].a.clone();
    let assignment = canonical_assignment(data, &a_hat, cfg.tie_tol)?;
    Ok(EstimateResult {
        cost: assignment.cost,
        assignment,
        trajectory: outcomes[best].trace.clone(),
        status: if outcomes[best].converged {
            SolverStatus::Converged
        } else {
            SolverStatus::IterLimit
        },
        restarts_used: cfg.restarts,
        best_restart: best,
        traces: outcomes.iter().map(|o| o.trace.clone()).collect(),
        distinct_optima: distinct,
        empty_modes: Vec::new(),
        a_hat,
    })
}

/// `s^N`, saturating.
pub fn labelling_count(s: usize, len: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..len {
        acc = acc.saturating_mul(s as u128);
    }
    acc
}

/// Exhaustive minimisation over all labellings (each partition visited once
/// up to relabelling). Requires `s^N <= budget`.
pub fn lsm_bruteforce(
    data: &Dataset,
    s: usize,
    budget: u128,
    tie_tol: f64,
) -> Result<EstimateResult> {
    if s == 0 {
        return Err(LsmError::InvalidArgument("s must be at least 1".into()));
    }
    let len = data.len();
    let needed = labelling_count(s, len);
    if needed > budget {
        return Err(LsmError::BudgetExceeded {
            needed,
            budget,
            advice: "use the heuristic estimator or fewer samples",
        });
    }

    struct Search<'a> {
        data: &'a Dataset,
        s: usize,
        labels: Vec<usize>,
        best_cost: f64,
        optima: Vec<(ParameterMatrix, Vec<usize>, Vec<usize>)>,
    }

    impl Search<'_> {
        fn leaf(&mut self) -> Result<()> {
            let mut members = vec![Vec::new(); self.s];
            for (t, &l) in self.labels.iter().enumerate() {
                members[l].push(t);
            }
            let mut a = ParameterMatrix::zeros(self.data.n(), self.s);
            let mut total = 0.0;
            let mut empty = Vec::new();
            for (i, m) in members.iter().enumerate() {
                if m.is_empty() {
                    empty.push(i);
                    continue;
                }
                let xs = select_columns(self.data.x(), m);
                let ys: Vec<f64> = m.iter().map(|&t| self.data.y()[t]).collect();
                let fit = lad_regression(&xs, &ys)?;
                total += fit.objective;
                a.set_column(i, &fit.a);
            }
            let tol = 1e-9 * (1.0 + self.best_cost.min(total));
            if total < self.best_cost - tol {
                self.best_cost = total;
                self.optima.clear();
                self.optima.push((a, self.labels.clone(), empty));
            } else if total <= self.best_cost + tol {
                self.optima.push((a, self.labels.clone(), empty));
            }
            Ok(())
        }

        fn descend(&mut self, t: usize, used: usize) -> Result<()> {
            if t == self.labels.len() {
                return self.leaf();
            }
            let top = (used + 1).min(self.s);
            for l in 0..top {
                self.labels[t] = l;
                self.descend(t + 1, used.max(l + 1))?;
            }
            Ok(())
        }
    }

    let mut search = Search {
        data,
        s,
        labels: vec![0; len],
        best_cost: f64::INFINITY,
        optima: Vec::new(),
    };
    search.descend(0, 0)?;

    let mut distinct = Vec::new();
    for (a, _, _) in &search.optima {
        push_distinct(&mut distinct, a);
    }
    let (a_hat, _, empty_modes) = search.optima.swap_remove(0);
    let assignment = canonical_assignment(data, &a_hat, tie_tol)?;
    Ok(EstimateResult {
        cost: assignment.cost,
        assignment,
        trajectory: vec![search.best_cost],
        status: SolverStatus::OracleExact,
        restarts_used: 0,
        best_restart: 0,
        traces: Vec::new(),
        distinct_optima: distinct,
        empty_modes,
        a_hat,
    })
}

/// Heuristic and/or oracle estimates, as selected by `cfg.mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub heuristic: Option<EstimateResult>,
    pub oracle: Option<EstimateResult>,
}

impl Estimates {
    /// The lowest-cost estimate available (oracle on ties).
    pub fn best(&self) -> &EstimateResult {
        match (&self.heuristic, &self.oracle) {
            (Some(h), Some(o)) => {
                if h.cost < o.cost {
                    h
                } else {
                    o
                }
            }
            (Some(h), None) => h,
            (None, Some(o)) => o,
            (None, None) => unreachable!("at least one estimator always runs"),
        }
    }
}

pub fn estimate(data: &Dataset, s: usize, cfg: &EstimatorConfig) -> Result<Estimates> {
    let heuristic = match cfg.mode {
        EstimatorMode::Heuristic | EstimatorMode::Both => Some(lsm_alternating(data, s, cfg)?),
        EstimatorMode::ExactBruteforce => None,
    };
    let oracle = match cfg.mode {
        EstimatorMode::ExactBruteforce | EstimatorMode::Both => {
            Some(lsm_bruteforce(data, s, cfg.bruteforce_budget, cfg.tie_tol)?)
        }
        EstimatorMode::Heuristic => None,
    };
    Ok(Estimates { heuristic, oracle })
}
