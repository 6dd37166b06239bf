//! Shift-rotation decompositions `w = cos(g) (w*; 0) - sin(g) (0; w*)`.
//!
//! Writing `s = tan(g)` and `q_j = cos(g) w*(j)`, the first `d - 1` relations
//! give `q_1 = w(1)`, `q_j = w(j) + s q_{j-1}`, and the last one closes iff
//! `P(s) = sum_i w(i) s^(d-i)` vanishes. The decompositions are therefore in
//! bijection with pairs (real root of `P`, branch `g` or `g + pi`).

use std::f64::consts::{PI, TAU};

use nalgebra::{Complex, DMatrix, Schur};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{max_abs_diff, norm_inf};
use crate::rng;

const IMAG_THRESHOLD: f64 = 1e-8;
const CLUSTER_RADIUS: f64 = 1e-7;
const NEWTON_STEPS: usize = 2;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientElement {
    pub w_star: Vec<f64>,
    /// Angle in `[0, 2 pi)`.
    pub gamma: f64,
}

pub fn reconstruct(w_star: &[f64], gamma: f64) -> Vec<f64> {
    let (s, c) = gamma.sin_cos();
    let d = w_star.len() + 1;
    (0..d)
        .map(|j| {
            let head = if j < d - 1 { c * w_star[j] } else { 0.0 };
            let tail = if j > 0 { s * w_star[j - 1] } else { 0.0 };
            head - tail
        })
        .collect()
}

fn check_input(w: &[f64], tol: f64) -> Result<()> {
    if w.len() < 2 {
        return Err(invalid("decompose needs d >= 2"));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(invalid("decompose: non-finite entry"));
    }
    let scale = norm_inf(w);
    let d = w.len();
    if !(w[0].abs() > tol * scale && w[d - 1].abs() > tol * scale) {
        return Err(invalid("decompose: first and last entries must be nonzero"));
    }
    Ok(())
}

fn horner(w: &[f64], s: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in w {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

/// Eigenvalues of a companion matrix. Highly symmetric companions (roots
/// spread evenly on a circle) can stall the shifted QR iteration; those are
/// retried after a fixed orthogonal similarity transform.
fn eigenvalues(comp: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if let Some(s) = Schur::try_new(comp.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        return Ok(s.complex_eigenvalues().iter().copied().collect());
    }
    let k = comp.nrows();
    let mut r = rng::rng(0x5eed);
    let g = DMatrix::<f64>::from_fn(k, k, |_, _| r.sample(StandardNormal));
    let q = g.qr().q();
    let rotated = q.transpose() * comp * &q;
    Schur::try_new(rotated, f64::EPSILON, SCHUR_MAX_ITER)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .ok_or_else(|| Error::InternalConsistency("companion eigenvalue iteration did not converge".into()))
}

/// Real roots of `P`, polished and clustered.
fn real_roots(w: &[f64]) -> Result<Vec<f64>> {
    let deg = w.len() - 1;
    let lead = w[0];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        comp[(0, k)] = -w[k + 1] / lead;
    }
    for k in 1..deg {
        comp[(k, k - 1)] = 1.0;
    }
    let mut roots: Vec<f64> = eigenvalues(comp)?
        .iter()
        .filter(|z| z.im.abs() <= IMAG_THRESHOLD * (1.0 + z.norm()))
        .map(|z| {
            let mut s = z.re;
            for _ in 0..NEWTON_STEPS {
                let (p, dp) = horner(w, s);
                if dp != 0.0 {
                    let next = s - p / dp;
                    if next.is_finite() && horner(w, next).0.abs() <= p.abs() {
                        s = next;
                    }
                }
            }
            s
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    Ok(cluster(roots, |a, b| (a - b).abs() <= CLUSTER_RADIUS * (1.0 + a.abs().max(b.abs()))))
}

fn cluster(sorted: Vec<f64>, close: impl Fn(f64, f64) -> bool) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for v in sorted {
        match out.last() {
            Some(&last) if close(last, v) => {}
            _ => out.push(v),
        }
    }
    out
}

/// `w*` for a given angle, choosing the better-conditioned of the forward
/// and backward recursions.
pub fn w_star_for(w: &[f64], gamma: f64) -> Vec<f64> {
    let (s, c) = gamma.sin_cos();
    let d = w.len();
    let mut fwd = vec![0.0; d - 1];
    fwd[0] = w[0] / c;
    for j in 1..d - 1 {
        fwd[j] = (w[j] + s * fwd[j - 1]) / c;
    }
    let mut bwd = vec![0.0; d - 1];
    bwd[d - 2] = -w[d - 1] / s;
    for j in (1..d - 1).rev() {
        bwd[j - 1] = (c * bwd[j] - w[j]) / s;
    }
    let rf = max_abs_diff(&reconstruct(&fwd, gamma), w);
    let rb = max_abs_diff(&reconstruct(&bwd, gamma), w);
    if rf.is_finite() && (rf <= rb || !rb.is_finite()) {
        fwd
    } else {
        bwd
    }
}

fn wrap(gamma: f64) -> f64 {
    let g = gamma.rem_euclid(TAU);
    if g >= TAU { 0.0 } else { g }
}

fn elements_for(w: &[f64], gammas: impl IntoIterator<Item = f64>, tol: f64) -> Vec<QuotientElement> {
    let scale = norm_inf(w);
    let mut out: Vec<QuotientElement> = gammas
        .into_iter()
        .map(|g| {
            let g = wrap(g);
            QuotientElement { w_star: w_star_for(w, g), gamma: g }
        })
        .filter(|e| max_abs_diff(&reconstruct(&e.w_star, e.gamma), w) <= tol * scale)
        .collect();
    out.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    out
}

/// All quotient elements of `w`, sorted by angle.
///
/// Elements whose reconstruction misses `w` by more than `tol * ||w||_inf`
/// are discarded.
pub fn decompose(w: &[f64], tol: f64) -> Result<Vec<QuotientElement>> {
    check_input(w, tol)?;
    let gammas = real_roots(w)?
        .into_iter()
        .flat_map(|s| {
            let g = s.atan();
            [g, g + PI]
        });
    Ok(elements_for(w, gammas, tol))
}

/// `cos(g)^(d-1) P(tan g)`, free of poles.
fn scaled_residual(w: &[f64], gamma: f64) -> f64 {
    let (s, c) = gamma.sin_cos();
    let mut h = w[0];
    let mut cp = 1.0;
    for &wj in &w[1..] {
        cp *= c;
        h = wj * cp + s * h;
    }
    h
}

fn bisect(w: &[f64], mut a: f64, mut b: f64) -> f64 {
    let mut fa = scaled_residual(w, a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = scaled_residual(w, m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Brute-force counterpart of [`decompose`]: scans a uniform grid of
/// `grid_points` angles for sign changes of the closing residual, bisects
/// each bracket, and inspects local minima of `|residual|` for root pairs
/// that fall inside a single grid cell. Coarse grids may miss roots.
pub fn decompose_oracle(w: &[f64], grid_points: usize, tol: f64) -> Result<Vec<QuotientElement>> {
    check_input(w, tol)?;
    let n = grid_points.max(3);
    let h = TAU / n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let vals: Vec<f64> = grid.iter().map(|&g| scaled_residual(w, g)).collect();
    let touch = 1e-13 * w.iter().map(|v| v.abs()).sum::<f64>();
    let mut found = Vec::new();
    for k in 0..n {
        if vals[k] == 0.0 {
            found.push(grid[k]);
        } else if vals[k + 1] != 0.0 && (vals[k] > 0.0) != (vals[k + 1] > 0.0) {
            found.push(bisect(w, grid[k], grid[k + 1]));
        }
    }
    for k in 1..n {
        let (l, c, r) = (vals[k - 1], vals[k], vals[k + 1]);
        let same_sign = (l > 0.0) == (c > 0.0) && (c > 0.0) == (r > 0.0);
        if !(same_sign && c.abs() < l.abs() && c.abs() <= r.abs()) {
            continue;
        }
        let sgn = c.signum();
        let (a, b) = (grid[k - 1], grid[k + 1]);
        let g = golden_min(|t| sgn * scaled_residual(w, t), a, b);
        let fmin = sgn * scaled_residual(w, g);
        if fmin < 0.0 {
            found.push(bisect(w, a, g));
            found.push(bisect(w, g, b));
        } else if fmin <= touch {
            found.push(g);
        }
    }
    let found: Vec<f64> = found.into_iter().map(wrap).collect();
    let mut sorted = found;
    sorted.sort_by(f64::total_cmp);
    let mut merged = cluster(sorted, |a, b| (a - b).abs() <= CLUSTER_RADIUS);
    // Wrap-around duplicate at 0 / 2 pi.
    if merged.len() >= 2 && merged[0] + TAU - merged[merged.len() - 1] <= CLUSTER_RADIUS {
        merged.pop();
    }
    Ok(elements_for(w, merged, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    #[test]
    fn reconstruct_examples() {
        let w = reconstruct(&[SQRT_2], FRAC_PI_4);
        assert!(max_abs_diff(&w, &[1.0, -1.0]) < 1e-15);
        let w = reconstruct(&[-SQRT_2], 5.0 * FRAC_PI_4);
        assert!(max_abs_diff(&w, &[1.0, -1.0]) < 1e-15);
        assert_eq!(reconstruct(&[1.0, 2.0, 3.0], 0.0), vec![1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn two_point_vector() {
        let q = decompose(&[1.0, -1.0], 1e-9).unwrap();
        assert_eq!(q.len(), 2);
        assert!((q[0].gamma - FRAC_PI_4).abs() < 1e-14);
        assert!((q[0].w_star[0] - SQRT_2).abs() < 1e-14);
        assert!((q[1].gamma - 5.0 * FRAC_PI_4).abs() < 1e-14);
        assert!((q[1].w_star[0] + SQRT_2).abs() < 1e-14);
        let o = decompose_oracle(&[1.0, -1.0], 1000, 1e-9).unwrap();
        assert_eq!(o.len(), 2);
        for (a, b) in q.iter().zip(&o) {
            assert!((a.gamma - b.gamma).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_reference_vector_has_no_decomposition() {
        let x1 = reference::to_f64(&reference::X1);
        assert!(decompose(&x1, 1e-9).unwrap().is_empty());
        assert!(decompose_oracle(&x1, 20_000, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn pathological_input_rejected() {
        assert!(decompose(&[0.0, 1.0], 1e-9).is_err());
        assert!(decompose(&[1.0, 0.0], 1e-9).is_err());
        assert!(decompose(&[1.0], 1e-9).is_err());
        assert!(decompose_oracle(&[1.0, 2.0, 0.0], 100, 1e-9).is_err());
    }

    #[test]
    fn planted_rational_root_is_found() {
        // tan(g) = 3/4 exactly; w* integer.
        let ws = [2.0, -1.0, 3.0, 1.0];
        let (c, s) = (0.8, 0.6);
        let w: Vec<f64> = (0..5)
            .map(|j| {
                let head = if j < 4 { c * ws[j] } else { 0.0 };
                let tail = if j > 0 { s * ws[j - 1] } else { 0.0 };
                head - tail
            })
            .collect();
        let q = decompose(&w, 1e-9).unwrap();
        let g0 = 0.75f64.atan();
        let hit = q.iter().find(|e| (e.gamma - g0).abs() < 1e-10).expect("planted angle");
        assert!(max_abs_diff(&hit.w_star, &ws) < 1e-12);
        assert!(q.iter().any(|e| (e.gamma - g0 - PI).abs() < 1e-10));
    }

    #[test]
    fn double_root_reported_once() {
        // P(s) = (s - 1)^2 (s + 2) = s^3 - 3s + 2.
        let w = [1.0, 0.0, -3.0, 2.0];
        let q = decompose(&w, 1e-6).unwrap();
        let o = decompose_oracle(&w, 4000, 1e-6).unwrap();
        assert_eq!(q.len(), o.len());
        assert!(q.len() == 4 || q.len() == 2);
    }

    #[test]
    fn angles_avoid_vertical() {
        let mut r = rng::rng(5);
        for _ in 0..200 {
            let w: Vec<f64> = (0..8).map(|_| r.sample(StandardNormal)).collect();
            for e in decompose(&w, 1e-9).unwrap() {
                assert!(e.gamma.cos().abs() > 1e-9);
                assert!((0.0..TAU).contains(&e.gamma));
            }
        }
    }

    proptest! {
        #[test]
        fn decompose_contract(d in 2usize..16, seed in any::<u64>()) {
            let mut r = rng::rng(seed);
            let w: Vec<f64> = (0..d).map(|_| loop {
                let v: f64 = r.sample(StandardNormal);
                if v.abs() > 1e-3 { break v; }
            }).collect();
            let q = decompose(&w, 1e-9).unwrap();
            prop_assert!(q.len() <= 2 * d - 2);
            if d % 2 == 0 { prop_assert!(!q.is_empty()); }
            for e in &q {
                prop_assert!(max_abs_diff(&reconstruct(&e.w_star, e.gamma), &w) <= 1e-9 * norm_inf(&w));
            }
            let o = decompose_oracle(&w, 20_000, 1e-9).unwrap();
            prop_assert_eq!(q.len(), o.len());
            for (a, b) in q.iter().zip(&o) {
                prop_assert!((a.gamma - b.gamma).abs() < 1e-6);
            }
        }
    }
}
