//! Canonical switching assignment induced by a parameter matrix.
//!
//! Every sample goes to a mode with the smallest absolute residual. When
//! several modes tie, the free choices are spent making the partition as
//! balanced as possible (maximising the smallest mode cardinality), and any
//! remaining freedom is resolved by taking the lexicographically smallest
//! label sequence. Feasibility of a target minimum cardinality `k` is a
//! bipartite flow problem: each sample supplies one unit, each mode demands
//! `k` units, and a sample may only feed the modes in its tie set.

use serde::Serialize;

use crate::error::{LsmError, Result};
use crate::flow::FlowNetwork;
use crate::model::{Dataset, ParameterMatrix};

/// Default relative tie tolerance for residual comparisons.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentResult {
    /// 0-based mode label per sample.
    pub sigma: Vec<usize>,
    /// `partition[i]` lists the (0-based, increasing) samples of mode `i`.
    pub partition: Vec<Vec<usize>>,
    /// Signed residuals `y_t - x_t . a_{sigma(t)}`.
    pub phi: Vec<f64>,
    pub cost: f64,
    pub min_cardinality: usize,
}

impl AssignmentResult {
    pub fn cardinalities(&self) -> Vec<usize> {
        self.partition.iter().map(Vec::len).collect()
    }
}

fn check_dims(data: &Dataset, a: &ParameterMatrix) -> Result<()> {
    if data.n() != a.n() {
        return Err(LsmError::DimensionMismatch(format!(
            "dataset has n = {}, parameter matrix has n = {}",
            data.n(),
            a.n()
        )));
    }
    Ok(())
}

/// Signed residual matrix, `residuals[t][i] = y_t - x_t . a_i`.
pub fn residual_table(data: &Dataset, a: &ParameterMatrix) -> Result<Vec<Vec<f64>>> {
    check_dims(data, a)?;
    let products = data.x().transpose() * a.matrix();
    Ok((0..data.len())
        .map(|t| (0..a.s()).map(|i| data.y()[t] - products[(t, i)]).collect())
        .collect())
}

/// Modes within tolerance of the smallest absolute residual, per sample.
pub fn tie_sets(residuals: &[Vec<f64>], tie_tol: f64) -> Vec<Vec<usize>> {
    residuals
        .iter()
        .map(|row| {
            let min = row.iter().fold(f64::INFINITY, |m, r| m.min(r.abs()));
            let limit = min + tie_tol * (1.0 + min);
            (0..row.len()).filter(|&i| row[i].abs() <= limit).collect()
        })
        .collect()
}

/// Whether every mode can receive at least `k` samples given the labels
/// already fixed.
fn feasible(allowed: &[Vec<usize>], fixed: &[Option<usize>], s: usize, k: usize) -> bool {
    let mut counts = vec![0usize; s];
    for l in fixed.iter().flatten() {
        counts[*l] += 1;
    }
    let demand: Vec<usize> = counts.iter().map(|&c| k.saturating_sub(c)).collect();
    let total: usize = demand.iter().sum();
    if total == 0 {
        return true;
    }
    let free: Vec<usize> = (0..allowed.len()).filter(|&t| fixed[t].is_none()).collect();
    if free.len() < total {
        return false;
    }
    let source = free.len() + s;
    let sink = source + 1;
    let mut net = FlowNetwork::new(sink + 1);
    for (slot, &t) in free.iter().enumerate() {
        net.add_edge(source, slot, 1);
        for &i in &allowed[t] {
            if demand[i] > 0 {
                net.add_edge(slot, free.len() + i, 1);
            }
        }
    }
    for (i, &d) in demand.iter().enumerate() {
        if d > 0 {
            net.add_edge(free.len() + i, sink, d as i64);
        }
    }
    net.max_flow(source, sink) == total as i64
}

/// Canonical labels from tie sets: max-min balanced, then lexicographically
/// smallest.
pub fn balanced_labels(allowed: &[Vec<usize>], s: usize) -> Vec<usize> {
    let len = allowed.len();
    let mut fixed: Vec<Option<usize>> = allowed
        .iter()
        .map(|a| if a.len() == 1 { Some(a[0]) } else { None })
        .collect();
    if fixed.iter().all(Option::is_some) {
        return fixed.into_iter().map(Option::unwrap).collect();
    }
    let best_k = (0..=len / s)
        .rev()
        .find(|&k| feasible(allowed, &fixed, s, k))
        .unwrap_or(0);
    for t in 0..len {
        if fixed[t].is_some() {
            continue;
        }
        let mut chosen = None;
        for &i in &allowed[t] {
            fixed[t] = Some(i);
            if feasible(allowed, &fixed, s, best_k) {
                chosen = Some(i);
                break;
            }
        }
        // Some label in the tie set always keeps best_k reachable.
        fixed[t] = Some(chosen.unwrap_or(allowed[t][0]));
    }
    fixed.into_iter().map(Option::unwrap).collect()
}

/// The canonical assignment `sigma_A` with its partition and residuals.
pub fn canonical_assignment(
    data: &Dataset,
    a: &ParameterMatrix,
    tie_tol: f64,
) -> Result<AssignmentResult> {
    if !(tie_tol >= 0.0) {
        return Err(LsmError::InvalidArgument("tie_tol must be >= 0".into()));
    }
    let residuals = residual_table(data, a)?;
    let allowed = tie_sets(&residuals, tie_tol);
    let sigma = balanced_labels(&allowed, a.s());
    Ok(assemble(&residuals, sigma, a.s()))
}

/// Assignment record for an explicit labelling.
pub fn assignment_for_labels(
    data: &Dataset,
    a: &ParameterMatrix,
    sigma: &[usize],
) -> Result<AssignmentResult> {
    let residuals = residual_table(data, a)?;
    if sigma.len() != data.len() {
        return Err(LsmError::DimensionMismatch(
            "labelling length differs from N".into(),
        ));
    }
    if let Some(&bad) = sigma.iter().find(|&&l| l >= a.s()) {
        return Err(LsmError::InvalidLabel {
            label: bad + 1,
            modes: a.s(),
        });
    }
    Ok(assemble(&residuals, sigma.to_vec(), a.s()))
}

fn assemble(residuals: &[Vec<f64>], sigma: Vec<usize>, s: usize) -> AssignmentResult {
    let mut partition = vec![Vec::new(); s];
    for (t, &l) in sigma.iter().enumerate() {
        partition[l].push(t);
    }
    let phi: Vec<f64> = sigma
        .iter()
        .enumerate()
        .map(|(t, &l)| residuals[t][l])
        .collect();
    let cost = phi.iter().map(|v| v.abs()).sum();
    let min_cardinality = partition.iter().map(Vec::len).min().unwrap_or(0);
    AssignmentResult {
        sigma,
        partition,
        phi,
        cost,
        min_cardinality,
    }
}

/// Sum over samples of the smallest absolute residual across modes.
pub fn cost(data: &Dataset, a: &ParameterMatrix) -> Result<f64> {
    check_dims(data, a)?;
    let mut total = 0.0;
    for t in 0..data.len() {
        let xt = data.regressor(t);
        let yt = data.y()[t];
        let best = (0..a.s())
            .map(|i| (yt - xt.dot(&a.matrix().column(i))).abs())
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    Ok(total)
}

fn check_r(r: usize, len: usize) -> Result<()> {
    if r > len {
        return Err(LsmError::OutOfRange {
            name: "r",
            value: r,
            lo: 0,
            hi: len,
        });
    }
    Ok(())
}

/// Sum of the `N - r` smallest absolute entries of `phi`: the l1 distance
/// from `phi` to the set of `r`-sparse vectors.
pub fn delta_r(phi: &[f64], r: usize) -> Result<f64> {
    check_r(r, phi.len())?;
    let mut mags: Vec<f64> = phi.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    Ok(mags[..phi.len() - r].iter().sum())
}

/// Indices of the `r` largest absolute entries; equal magnitudes are taken in
/// increasing index order.
pub fn top_r_indices(v: &[f64], r: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(r);
    idx
}

/// Right-hand side minus left-hand side of the l1 concentration inequality
///
/// ```text
/// |v'-v|_1 - 2 |(v'-v)_T|_1  <=  |v'|_1 - |v|_1 + 2 inf_{w r-sparse} |w - v|_1
/// ```
///
/// with `T` the indices of the `r` largest entries of `v`. Nonnegative up to
/// rounding for every input.
pub fn lemma1_gap(v: &[f64], v_prime: &[f64], r: usize) -> Result<f64> {
    if v.len() != v_prime.len() {
        return Err(LsmError::DimensionMismatch(
            "vectors differ in length".into(),
        ));
    }
    check_r(r, v.len())?;
    let l1 = |w: &[f64]| w.iter().map(|x| x.abs()).sum::<f64>();
    let diff: Vec<f64> = v_prime.iter().zip(v).map(|(a, b)| a - b).collect();
    let top = top_r_indices(v, r);
    let diff_on_top: f64 = top.iter().map(|&t| diff[t].abs()).sum();
    let sparse_dist = delta_r(v, r)?;
    let rhs = l1(v_prime) - l1(v) + 2.0 * sparse_dist;
    let lhs = l1(&diff) - 2.0 * diff_on_top;
    Ok(rhs - lhs)
}
