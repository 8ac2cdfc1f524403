//! Dense tableau simplex for small linear programs in standard form
//!
//! ```text
//! minimize c^T x  subject to  A x = b,  x >= 0,  b >= 0
//! ```
//!
//! The caller supplies a starting basis made of unit columns (slacks or
//! error variables), so no phase-one is needed for any program built in
//! this crate. Pricing is Dantzig's rule, switching to Bland's rule after a
//! run of degenerate pivots so the method always terminates.

use crate::error::{LsmError, Result};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    /// Row-major constraint matrix, `rows x cols`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// One starting basic column per row; must be a unit column for that row.
    pub basis: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// A nonbasic column has (numerically) zero reduced cost, so the optimum
    /// may not be unique.
    pub dual_degenerate: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome {
    Optimal(LpSolution),
    Unbounded,
}

const DEGENERATE_STREAK: usize = 50;

pub(crate) fn solve(problem: &StandardForm) -> Result<LpOutcome> {
    let rows = problem.a.len();
    let cols = problem.c.len();
    if problem.b.len() != rows || problem.basis.len() != rows {
        return Err(LsmError::Lp("inconsistent problem dimensions".into()));
    }
    if problem.a.iter().any(|r| r.len() != cols) {
        return Err(LsmError::Lp("ragged constraint matrix".into()));
    }
    if problem.b.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(LsmError::Lp(
            "right-hand side must be finite and nonnegative".into(),
        ));
    }

    let scale_a = problem
        .a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let scale_c = problem
        .c
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let eps_pivot = 1e-11 * scale_a;
    let eps_cost = 1e-11 * scale_c;

    // Tableau: rows x (cols + 1), last column is the right-hand side.
    let width = cols + 1;
    let mut t: Vec<f64> = Vec::with_capacity(rows * width);
    for (row, rhs) in problem.a.iter().zip(&problem.b) {
        t.extend_from_slice(row);
        t.push(*rhs);
    }
    // Reduced-cost row; last entry holds -objective.
    let mut z: Vec<f64> = problem.c.clone();
    z.push(0.0);
    let mut basis = problem.basis.clone();
    let mut is_basic = vec![false; cols];
    for (i, &j) in basis.iter().enumerate() {
        if j >= cols || is_basic[j] {
            return Err(LsmError::Lp("invalid starting basis".into()));
        }
        is_basic[j] = true;
        if (t[i * width + j] - 1.0).abs() > 1e-12 {
            return Err(LsmError::Lp(
                "starting basis column is not a unit column".into(),
            ));
        }
        let cb = z[j];
        if cb != 0.0 {
            for k in 0..width {
                z[k] -= cb * t[i * width + k];
            }
        }
    }

    let max_iters = 50 * (rows + cols) + 1000;
    let mut degenerate_run = 0usize;
    for _ in 0..max_iters {
        let bland = degenerate_run >= DEGENERATE_STREAK;
        let mut entering = None;
        let mut best = -eps_cost;
        for j in 0..cols {
            if is_basic[j] {
                continue;
            }
            if z[j] < best {
                entering = Some(j);
                if bland {
                    break;
                }
                best = z[j];
            }
        }
        let Some(q) = entering else {
            let x = extract(&t, width, &basis, cols);
            let objective = problem.c.iter().zip(&x).map(|(c, v)| c * v).sum();
            let dual_degenerate = (0..cols).any(|j| !is_basic[j] && z[j].abs() <= 10.0 * eps_cost);
            return Ok(LpOutcome::Optimal(LpSolution {
                x,
                objective,
                dual_degenerate,
            }));
        };

        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            let coef = t[i * width + q];
            if coef > eps_pivot {
                let ratio = t[i * width + cols].max(0.0) / coef;
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - 1e-13 * best_ratio.max(1.0)
                            || (ratio <= best_ratio + 1e-13 * best_ratio.max(1.0)
                                && basis[i] < basis[l])
                    }
                };
                if better {
                    leaving = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        let Some(p) = leaving else {
            return Ok(LpOutcome::Unbounded);
        };
        if best_ratio <= 1e-14 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        pivot(&mut t, &mut z, width, rows, p, q);
        is_basic[basis[p]] = false;
        is_basic[q] = true;
        basis[p] = q;
    }
    Err(LsmError::Lp("iteration limit reached".into()))
}

fn pivot(t: &mut [f64], z: &mut [f64], width: usize, rows: usize, p: usize, q: usize) {
    let piv = t[p * width + q];
    for k in 0..width {
        t[p * width + k] /= piv;
    }
    t[p * width + q] = 1.0;
    let (before, rest) = t.split_at_mut(p * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |row: &mut [f64]| {
        let f = row[q];
        if f != 0.0 {
            for k in 0..width {
                row[k] -= f * prow[k];
            }
            row[q] = 0.0;
        }
    };
    for row in before.chunks_mut(width) {
        eliminate(row);
    }
    for row in after.chunks_mut(width) {
        eliminate(row);
    }
    eliminate(z);
    debug_assert_eq!(before.len() / width + 1 + after.len() / width, rows);
}

fn extract(t: &[f64], width: usize, basis: &[usize], cols: usize) -> Vec<f64> {
    let mut x = vec![0.0; cols];
    for (i, &j) in basis.iter().enumerate() {
        x[j] = t[i * width + cols].max(0.0);
    }
    x
}
