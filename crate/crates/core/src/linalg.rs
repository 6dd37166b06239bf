//! Small dense linear-algebra helpers shared across modules.

use nalgebra::DMatrix;

/// Singular values in non-increasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|p, q| q.total_cmp(p));
    s
}

/// Number of singular values strictly above `tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    rank_from_spectrum(&singular_values(a), tol)
}

pub fn rank_from_spectrum(s: &[f64], tol: f64) -> usize {
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * smax).count()
}

/// Ratio `sigma_2 / sigma_1` of the `2 x k` matrix with rows `a` and `b`.
/// Returns 0 when both rows vanish.
pub fn collinearity_ratio(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(2, a.len(), |i, j| if i == 0 { a[j] } else { b[j] });
    let s = singular_values(&m);
    if s[0] == 0.0 {
        0.0
    } else {
        s.get(1).copied().unwrap_or(0.0) / s[0]
    }
}

pub fn collinear(a: &[f64], b: &[f64], tol: f64) -> bool {
    collinearity_ratio(a, b) <= tol
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn outer(x: &[f64], y: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), y.len(), |i, j| x[i] * y[j])
}
