//! Linear convolution, its lifted (matrix) form, relay delay operators and
//! the rank-two null matrices of the lifted operator.
//!
//! `convolve`, `lift_apply` and `rank2_null_matrix` are generic over the
//! scalar so that the same code runs in exact integer/rational arithmetic
//! and in `f64`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, Scalar};
use num_traits::Zero;

use crate::error::{invalid, Result};
use crate::linalg::{norm_inf, numerical_rank};

/// Full linear convolution `z(l) = sum_j x(j) y(l+1-j)`, length `m + n - 1`.
pub fn convolve<T>(x: &[T], y: &[T]) -> Result<Vec<T>>
where
    T: Copy + Zero + Add<Output = T> + Mul<Output = T>,
{
    if x.is_empty() || y.is_empty() {
        return Err(invalid("convolve: inputs must be non-empty"));
    }
    let mut z = vec![T::zero(); x.len() + y.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            z[i + j] = z[i + j] + xi * yj;
        }
    }
    Ok(z)
}

/// Lifted convolution operator: anti-diagonal sums of an `m x n` matrix.
///
/// `lift_apply(x * y^T) == convolve(x, y)`.
pub fn lift_apply<T>(w: &DMatrix<T>) -> Result<Vec<T>>
where
    T: Scalar + Copy + Zero + Add<Output = T>,
{
    let (m, n) = w.shape();
    if m == 0 || n == 0 {
        return Err(invalid("lift_apply: matrix must be non-empty"));
    }
    let mut z = vec![T::zero(); m + n - 1];
    for j in 0..n {
        for i in 0..m {
            z[i + j] = z[i + j] + w[(i, j)];
        }
    }
    Ok(z)
}

/// Toeplitz delay operator `D^{-l}` of shape `(m+n-1) x n`: entry
/// `(i+l-1, i)` is one for `i = 1..=n` (1-based), zero elsewhere.
pub fn delay_matrix(l: usize, n: usize, m: usize) -> Result<DMatrix<f64>> {
    if n == 0 || m == 0 {
        return Err(invalid("delay_matrix: n and m must be positive"));
    }
    if l < 1 || l > m {
        return Err(invalid(format!("delay_matrix: delay {l} outside 1..={m}")));
    }
    let mut d = DMatrix::zeros(m + n - 1, n);
    for i in 0..n {
        d[(i + l - 1, i)] = 1.0;
    }
    Ok(d)
}

/// Effective second-hop channel `sum_{j: g(j) != 0} g(j) D^{-j} h`.
pub fn channel_superposition(g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (g.len(), h.len());
    if m == 0 || n == 0 {
        return Err(invalid("channel_superposition: inputs must be non-empty"));
    }
    let hv = nalgebra::DVector::from_column_slice(h);
    let mut z = nalgebra::DVector::zeros(m + n - 1);
    for (j, &gj) in g.iter().enumerate() {
        if gj != 0.0 {
            z += delay_matrix(j + 1, n, m)? * &hv * gj;
        }
    }
    Ok(z.iter().copied().collect())
}

/// Rank-two element of the null space of the lifted operator built from
/// `u` (length `m-1`) and `v` (length `n-1`):
///
/// `Q = (u;0)(0;v)^T - (0;u)(v;0)^T`.
pub fn rank2_null_matrix<T>(u: &[T], v: &[T]) -> Result<DMatrix<T>>
where
    T: Scalar + Copy + Zero + Mul<Output = T> + Sub<Output = T>,
{
    if u.is_empty() || v.is_empty() {
        return Err(invalid("rank2_null_matrix: u and v must be non-empty (m, n >= 2)"));
    }
    let (m, n) = (u.len() + 1, v.len() + 1);
    let pad_last = |w: &[T], i: usize| if i < w.len() { w[i] } else { T::zero() };
    let pad_first = |w: &[T], i: usize| if i == 0 { T::zero() } else { w[i - 1] };
    Ok(DMatrix::from_fn(m, n, |i, j| {
        pad_last(u, i) * pad_first(v, j) - pad_first(u, i) * pad_last(v, j)
    }))
}

/// Membership in the rank-`k` null space `N(S, k)`: numerical rank at most
/// `k` and anti-diagonal sums no larger than `tol`.
pub fn in_nullspace(w: &DMatrix<f64>, k: usize, tol: f64) -> Result<bool> {
    if tol <= 0.0 {
        return Err(invalid("in_nullspace: tol must be positive"));
    }
    let s = lift_apply(w)?;
    Ok(numerical_rank(w, tol) <= k && norm_inf(&s) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use crate::reference;
    use num_rational::Rational64;
    use proptest::prelude::*;

    // Independent oracle: coefficients of the polynomial product computed
    // by evaluating both factors at distinct integer points and
    // interpolating would be overkill; expanding by hand is enough here.
    #[test]
    fn small_product_matches_hand_expansion() {
        // (1 + 2z)(3 + 4z + 5z^2) = 3 + 10z + 13z^2 + 10z^3
        assert_eq!(convolve(&[1i64, 2], &[3, 4, 5]).unwrap(), vec![3, 10, 13, 10]);
    }

    #[test]
    fn worked_example_is_exact() {
        let z1 = convolve(&reference::X1, &reference::Y1).unwrap();
        let z2 = convolve(&reference::X2, &reference::Y2).unwrap();
        assert_eq!(z1, reference::Z0.to_vec());
        assert_eq!(z2, reference::Z0.to_vec());
    }

    #[test]
    fn identity_element() {
        let x = [0.5, -1.25, 3.0];
        assert_eq!(convolve(&x, &[1.0]).unwrap(), x.to_vec());
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(convolve::<f64>(&[], &[1.0]).is_err());
        assert!(convolve::<f64>(&[1.0], &[]).is_err());
    }

    #[test]
    fn lift_of_outer_product() {
        let w = DMatrix::from_fn(2, 3, |i, j| [1i64, 2][i] * [3i64, 4, 5][j]);
        assert_eq!(lift_apply(&w).unwrap(), vec![3, 10, 13, 10]);
        assert_eq!(lift_apply(&DMatrix::<f64>::zeros(3, 2)).unwrap(), vec![0.0; 4]);
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(lift_apply(&q).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn delay_matrix_layout() {
        let d = delay_matrix(2, 2, 3).unwrap();
        assert_eq!(d.shape(), (4, 2));
        assert_eq!(d[(1, 0)], 1.0);
        assert_eq!(d[(2, 1)], 1.0);
        assert_eq!(d.sum(), 2.0);
        assert!(delay_matrix(0, 2, 3).is_err());
        assert!(delay_matrix(4, 2, 3).is_err());
    }

    #[test]
    fn zero_delay_pads_channel() {
        let h = [0.3, -0.7];
        assert_eq!(
            channel_superposition(&[1.0, 0.0, 0.0], &h).unwrap(),
            vec![0.3, -0.7, 0.0, 0.0]
        );
        assert_eq!(channel_superposition(&[0.0, 0.0], &h).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn two_relay_superposition() {
        // g = (1,0,1), h = (1,1): D^{-1}h + D^{-3}h = (1,1,0,0) + (0,0,1,1)
        let z = channel_superposition(&[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(z, vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(convolve(&[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap(), z);
    }

    #[test]
    fn smallest_null_matrix() {
        let q = rank2_null_matrix(&[1i64], &[1]).unwrap();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[0, 1, -1, 0]));
        let z = rank2_null_matrix(&[0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(z.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn null_matrix_is_exact_in_rationals() {
        let r = |a: i64, b: i64| Rational64::new(a, b);
        let u = [r(1, 3), r(-2, 7), r(5, 2)];
        let v = [r(3, 4), r(1, 9), r(-7, 5), r(2, 1)];
        let q = rank2_null_matrix(&u, &v).unwrap();
        assert!(lift_apply(&q).unwrap().iter().all(|e| *e == Rational64::from_integer(0)));
    }

    #[test]
    fn nullspace_membership() {
        let q = rank2_null_matrix(&[0.4, -1.1, 2.0], &[1.5, 0.2]).unwrap();
        assert!(in_nullspace(&q, 2, 1e-9).unwrap());
        assert!(!in_nullspace(&q, 1, 1e-9).unwrap());
        let w = outer(&[1.0, 2.0], &[-1.0, 0.5, 3.0]);
        assert!(!in_nullspace(&w, 1, 1e-9).unwrap());
        assert!(in_nullspace(&DMatrix::zeros(3, 3), 0, 1e-9).unwrap());
    }

    fn vec_strategy(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..=max)
    }

    proptest! {
        #[test]
        fn lift_matches_convolution(x in vec_strategy(12), y in vec_strategy(12)) {
            let z = convolve(&x, &y).unwrap();
            let s = lift_apply(&outer(&x, &y)).unwrap();
            let scale = 1.0 + norm_inf(&x) * norm_inf(&y);
            for (a, b) in z.iter().zip(&s) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn bilinear_and_scaling(x1 in vec_strategy(8), y in vec_strategy(8),
                                alpha in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
            let x2: Vec<f64> = x1.iter().map(|v| v * 0.5 - 1.0).collect();
            let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
            let lhs = convolve(&sum, &y).unwrap();
            let a = convolve(&x1, &y).unwrap();
            let b = convolve(&x2, &y).unwrap();
            let scale = 1.0 + norm_inf(&sum) * norm_inf(&y) * (x1.len() as f64);
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - a[i] - b[i]).abs() <= 1e-12 * scale);
            }
            let sx: Vec<f64> = x1.iter().map(|v| v * alpha).collect();
            let sy: Vec<f64> = y.iter().map(|v| v / alpha).collect();
            let c = convolve(&sx, &sy).unwrap();
            for i in 0..c.len() {
                prop_assert!((c[i] - a[i]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn rank_one_nullspace_is_trivial(x in vec_strategy(10), y in vec_strategy(10)) {
            prop_assume!(norm_inf(&x) > 1e-3 && norm_inf(&y) > 1e-3);
            let z = convolve(&x, &y).unwrap();
            prop_assert!(norm_inf(&z) > 0.0);
        }

        #[test]
        fn null_matrix_annihilated(u in vec_strategy(11), v in vec_strategy(11)) {
            let q = rank2_null_matrix(&u, &v).unwrap();
            let s = lift_apply(&q).unwrap();
            prop_assert!(norm_inf(&s) <= 1e-12 * (1.0 + norm_inf(&u) * norm_inf(&v)));
        }

        #[test]
        fn superposition_equals_convolution(g in vec_strategy(9), h in vec_strategy(9)) {
            let a = channel_superposition(&g, &h).unwrap();
            let b = convolve(&g, &h).unwrap();
            let scale = 1.0 + norm_inf(&g) * norm_inf(&h);
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-12 * scale);
            }
        }
    }
}
