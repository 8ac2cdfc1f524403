//! Small dense linear-algebra helpers shared by the metric and estimator
//! routines. Regressor matrices are `n x N` with one column per sample.

use nalgebra::{DMatrix, DVector};

/// Columns of `x` selected by `idx`, in the given order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}

pub fn singular_values(x: &DMatrix<f64>) -> DVector<f64> {
    if x.ncols() == 0 || x.nrows() == 0 {
        return DVector::zeros(0);
    }
    x.clone().svd(false, false).singular_values
}

/// Largest singular value of `x` (zero for an empty matrix).
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    singular_values(x).iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Number of singular values above `threshold`.
pub fn rank_above(x: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(x)
        .iter()
        .filter(|&&s| s > threshold)
        .count()
}

/// `n`-th singular value of an `n x N` matrix with `N >= n` (zero otherwise).
pub fn smallest_row_singular_value(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if x.ncols() < n {
        return 0.0;
    }
    let mut sv: Vec<f64> = singular_values(x).iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.get(n - 1).copied().unwrap_or(0.0)
}

/// `lambda_min(X_I X_I^T)^{1/2}` for the columns `idx` of `x`.
pub fn gram_min_sqrt(x: &DMatrix<f64>, idx: &[usize]) -> f64 {
    let n = x.nrows();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for &t in idx {
        let col = x.column(t);
        for i in 0..n {
            let ci = col[i];
            for j in 0..n {
                gram[(i, j)] += ci * col[j];
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    min.max(0.0).sqrt()
}

/// Unit vector orthogonal to the `n - 1` columns `idx` of `x`, or `None`
/// when those columns do not span an `(n-1)`-dimensional subspace (relative
/// tolerance `tol` on the Gram eigenvalues).
pub fn orthogonal_ray(x: &DMatrix<f64>, idx: &[usize], tol: f64) -> Option<DVector<f64>> {
    let n = x.nrows();
    debug_assert_eq!(idx.len() + 1, n);
    if n == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for &t in idx {
        let col = x.column(t);
        gram += &col * col.transpose();
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let top = eig.eigenvalues[order[n - 1]].max(0.0);
    let second = eig.eigenvalues[order[1]];
    if top == 0.0 || second <= tol * top {
        return None;
    }
    let v = eig.eigenvectors.column(order[0]).into_owned();
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

/// Least-squares solution of `x_sub^T a = y_sub` (columns of `x_sub` are the
/// regressors). Returns `None` when the system is rank deficient.
pub fn interpolate(x_sub: &DMatrix<f64>, y_sub: &[f64], tol: f64) -> Option<DVector<f64>> {
    let n = x_sub.nrows();
    if x_sub.ncols() < n {
        return None;
    }
    let m = x_sub.transpose();
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol * smax) {
        return None;
    }
    let rhs = DVector::from_column_slice(y_sub);
    svd.solve(&rhs, 0.0).ok()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
