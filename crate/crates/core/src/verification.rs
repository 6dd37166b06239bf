//! Independent auditing of instances and dimension probes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::member;
use crate::conv::convolve;
use crate::error::{invalid, Error, Result};
use crate::generators::{AdversarialInstance, FamilyPlan};
use crate::linalg::{collinearity_ratio, dot, max_abs_diff, norm_inf, singular_values};
use crate::rng;

pub use crate::generators::{Family, SideSpec};

/// Ratio `sigma_2 / sigma_1` of `[x; x']` above which the two are considered
/// linearly independent.
pub const NONCOLLINEAR_RATIO: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
pub const SVD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub x: bool,
    pub y: bool,
    pub x_prime: bool,
    pub y_prime: bool,
}

impl Membership {
    pub fn all(&self) -> bool {
        self.x && self.y && self.x_prime && self.y_prime
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `||x * y - x' * y'||_inf / ||x * y||_inf`.
    pub conv_residual: f64,
    pub membership: Membership,
    pub noncollinear: bool,
    pub pathology_free: bool,
    pub equivalent_pairs: bool,
    pub pass: bool,
}

/// True iff `|x(1)|, |x(m)|, |y(1)|, |y(n)|` all exceed `tol`.
pub fn check_pathology(x: &[f64], y: &[f64], tol: f64) -> bool {
    match (x.first(), x.last(), y.first(), y.last()) {
        (Some(a), Some(b), Some(c), Some(d)) => [a, b, c, d].iter().all(|v| v.abs() > tol),
        _ => false,
    }
}

fn endpoints_clear(w: &[f64], tol: f64) -> bool {
    let s = norm_inf(w);
    !w.is_empty() && w[0].abs() > tol * s && w[w.len() - 1].abs() > tol * s
}

/// Whether `(x', y') = (a x, y / a)` for some `a != 0`, with relative
/// residual at most `tol` on both sides.
pub fn scaling_equivalent(x: &[f64], y: &[f64], xp: &[f64], yp: &[f64], tol: f64) -> bool {
    if x.len() != xp.len() || y.len() != yp.len() {
        return false;
    }
    // Estimate on whichever x has the larger magnitude for stability.
    let (a, inverted) = if norm_inf(x) >= norm_inf(xp) {
        (dot(x, xp) / dot(x, x), false)
    } else {
        (dot(x, xp) / dot(xp, xp), true)
    };
    if !a.is_finite() || a == 0.0 {
        return false;
    }
    let alpha = if inverted { 1.0 / a } else { a };
    let sx = norm_inf(x).max(norm_inf(xp));
    let sy = norm_inf(y).max(norm_inf(yp));
    let rx = x.iter().zip(xp).fold(0.0f64, |m, (p, q)| m.max((q - alpha * p).abs()));
    let ry = y.iter().zip(yp).fold(0.0f64, |m, (p, q)| m.max((q - p / alpha).abs()));
    rx <= tol * sx && ry <= tol * sy
}

/// Audit an instance from its two pairs and cone descriptions alone.
pub fn verify_instance(inst: &AdversarialInstance, tol: f64) -> Result<VerificationReport> {
    let (p1, p2) = (&inst.pair1, &inst.pair2);
    if p1.x.len() != inst.m || p2.x.len() != inst.m || p1.y.len() != inst.n || p2.y.len() != inst.n {
        return Err(invalid("instance vectors do not match (m, n)"));
    }
    if inst.cones.0.dim() != inst.m || inst.cones.1.dim() != inst.n {
        return Err(invalid("cone dimensions do not match (m, n)"));
    }
    let z1 = convolve(&p1.x, &p1.y)?;
    let z2 = convolve(&p2.x, &p2.y)?;
    let zs = norm_inf(&z1);
    let gap = max_abs_diff(&z1, &z2);
    let conv_residual = if zs > 0.0 { gap / zs } else { gap };
    let mem = |w: &[f64], c| member(w, c, tol * norm_inf(w));
    let membership = Membership {
        x: mem(&p1.x, &inst.cones.0)?,
        y: mem(&p1.y, &inst.cones.1)?,
        x_prime: mem(&p2.x, &inst.cones.0)?,
        y_prime: mem(&p2.y, &inst.cones.1)?,
    };
    let noncollinear = collinearity_ratio(&p1.x, &p2.x) > NONCOLLINEAR_RATIO;
    let pathology_free = [&p1.x, &p1.y, &p2.x, &p2.y].iter().all(|w| endpoints_clear(w, tol));
    let equivalent_pairs = scaling_equivalent(&p1.x, &p1.y, &p2.x, &p2.y, tol);
    let pass = conv_residual <= tol && membership.all() && noncollinear && pathology_free && !equivalent_pairs;
    Ok(VerificationReport { conv_residual, membership, noncollinear, pathology_free, equivalent_pairs, pass })
}

fn jacobian(plan: &FamilyPlan, point: &[f64], h: f64, margin: f64) -> Result<DMatrix<f64>> {
    let base = plan.signal_map(point, margin)?;
    let mut j = DMatrix::zeros(base.len(), point.len());
    let mut p = point.to_vec();
    for k in 0..point.len() {
        p[k] = point[k] + h;
        let fp = plan.signal_map(&p, margin)?;
        p[k] = point[k] - h;
        let fm = plan.signal_map(&p, margin)?;
        p[k] = point[k];
        for (r, (a, b)) in fp.iter().zip(&fm).enumerate() {
            j[(r, k)] = (a - b) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Remove the scaling direction `(x; -y)` from the column space of `j`.
fn project_scaling(j: &DMatrix<f64>, signal: &[f64], m: usize) -> DMatrix<f64> {
    let mut s = DVector::from_iterator(signal.len(), signal.iter().enumerate().map(|(i, v)| if i < m { *v } else { -*v }));
    let nrm = s.norm();
    if nrm == 0.0 {
        return j.clone();
    }
    s /= nrm;
    let coeffs = s.transpose() * j;
    j - &s * coeffs
}

/// Spectrum-based rank, or `None` when a singular value sits inside the
/// ambiguous band around the threshold.
fn gapped_rank(s: &[f64], svd_tol: f64) -> Option<usize> {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Some(0);
    }
    let ambiguous = s.iter().any(|&v| v > svd_tol * 1e-2 * smax && v < svd_tol * 1e1 * smax);
    if ambiguous {
        None
    } else {
        Some(s.iter().filter(|&&v| v > svd_tol * smax).count())
    }
}

fn ill_margin(fd_step: f64) -> f64 {
    (10.0 * fd_step).max(1e-8)
}

/// Numerical rank of the central-difference Jacobian of the family's
/// parameter-to-signal map at `point`.
pub fn jacobian_rank(family: &Family, point: &[f64], fd_step: f64, svd_tol: f64) -> Result<usize> {
    if !(fd_step > 0.0 && svd_tol > 0.0) {
        return Err(invalid("fd_step and svd_tol must be positive"));
    }
    let plan = family.plan()?;
    let j = jacobian(&plan, point, fd_step, ill_margin(fd_step))?;
    let s = singular_values(&j);
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v > svd_tol * smax).count())
}

/// Outcome of one probe trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialOutcome {
    Measured { pre: usize, post: usize },
    Inconclusive,
}

/// Probe one parameter point: ranks must agree between `fd_step` and
/// `fd_step / 2` and both spectra need a clear gap.
pub fn probe_point(plan: &FamilyPlan, point: &[f64], fd_step: f64, svd_tol: f64) -> Result<TrialOutcome> {
    let margin = ill_margin(fd_step);
    let signal = plan.signal_map(point, margin)?;
    let m = plan.cones()?.0.dim();
    let mut ranks = Vec::with_capacity(2);
    for h in [fd_step, 0.5 * fd_step] {
        let j = jacobian(plan, point, h, margin)?;
        let pre = gapped_rank(&singular_values(&j), svd_tol);
        let post = gapped_rank(&singular_values(&project_scaling(&j, &signal, m)), svd_tol);
        match (pre, post) {
            (Some(a), Some(b)) => ranks.push((a, b)),
            _ => return Ok(TrialOutcome::Inconclusive),
        }
    }
    if ranks[0] != ranks[1] {
        return Ok(TrialOutcome::Inconclusive);
    }
    Ok(TrialOutcome::Measured { pre: ranks[0].0, post: ranks[0].1 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimProbeResult {
    pub claimed: usize,
    pub measured_pre_quotient: usize,
    pub measured_post_quotient: usize,
    pub samples: usize,
    pub agreement: bool,
    /// Whether `claimed` is only a lower bound for this family.
    pub lower_bound: bool,
    /// Trials whose post-quotient rank agreed with the claim.
    pub agreeing_trials: usize,
    pub disagreeing_trials: usize,
    pub inconclusive_trials: usize,
}

fn agrees(post: usize, claimed: usize, lower_bound: bool) -> bool {
    if lower_bound { post >= claimed } else { post == claimed }
}

/// Majority-vote Jacobian rank over `trials` random admissible points.
///
/// Sparse families must match their claimed dimension exactly; families with
/// a coded side only need to reach it.
pub fn estimate_unidentifiable_dim(family: &Family, trials: usize, seed: u64) -> Result<DimProbeResult> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let plan = family.plan()?;
    let claimed = plan.claimed_dim();
    let lower_bound = plan.claim_is_lower_bound();
    let mut votes: Vec<((usize, usize), usize)> = Vec::new();
    let (mut agreeing, mut disagreeing, mut inconclusive) = (0, 0, 0);
    for t in 0..trials {
        let mut r = rng::stream(seed, t as u64);
        let point = plan.sample_point(&mut r)?;
        let outcome = match probe_point(&plan, &point, FD_STEP, SVD_TOL) {
            Ok(o) => o,
            Err(Error::IllConditionedPoint(_)) => TrialOutcome::Inconclusive,
            Err(e) => return Err(e),
        };
        match outcome {
            TrialOutcome::Inconclusive => inconclusive += 1,
            TrialOutcome::Measured { pre, post } => {
                if agrees(post, claimed, lower_bound) {
                    agreeing += 1;
                } else {
                    disagreeing += 1;
                }
                match votes.iter_mut().find(|(k, _)| *k == (pre, post)) {
                    Some((_, c)) => *c += 1,
                    None => votes.push(((pre, post), 1)),
                }
            }
        }
    }
    if 2 * inconclusive > trials {
        return Err(Error::Inconclusive(format!("{inconclusive} of {trials} trials ill-conditioned")));
    }
    votes.sort_by(|a, b| b.1.cmp(&a.1));
    if votes.len() >= 2 && votes[0].1 == votes[1].1 {
        return Err(Error::Inconclusive("tied rank vote".into()));
    }
    let ((pre, post), _) = votes[0];
    Ok(DimProbeResult {
        claimed,
        measured_pre_quotient: pre,
        measured_post_quotient: post,
        samples: trials,
        agreement: agrees(post, claimed, lower_bound),
        lower_bound,
        agreeing_trials: agreeing,
        disagreeing_trials: disagreeing,
        inconclusive_trials: inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{ConeSpec, IndexSet};
    use crate::generators::{gen_sparse_instance, SignalPair};
    use crate::reference;

    fn set(v: &[usize]) -> IndexSet {
        IndexSet::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn pathology_examples() {
        assert!(!check_pathology(&[0.0, 1.0, 1.0], &[1.0, 1.0], 1e-9));
        assert!(!check_pathology(&[1e-9, 1.0], &[1.0, 1.0], 1e-9));
        assert!(check_pathology(&[1.0, 2.0], &[3.0, 4.0], 1e-9));
        // The reference pairs end in zeros, so they are pathological.
        let x1 = reference::to_f64(&reference::X1);
        let y1 = reference::to_f64(&reference::Y1);
        assert!(!check_pathology(&x1, &y1, 1e-9));
    }

    #[test]
    fn reference_pairs_report() {
        let inst = AdversarialInstance {
            m: 11,
            n: 7,
            pair1: SignalPair { x: reference::to_f64(&reference::X1), y: reference::to_f64(&reference::Y1) },
            pair2: SignalPair { x: reference::to_f64(&reference::X2), y: reference::to_f64(&reference::Y2) },
            params: crate::generators::InstanceParams {
                u: vec![], v: vec![], theta: 0.0, phi: 0.0, c1: None, c2: None, c1p: None, c2p: None,
            },
            cones: (ConeSpec::zero(set(&reference::SPARSE_LAMBDA), 11).unwrap(), ConeSpec::unconstrained(7).unwrap()),
            claimed_dim: 0,
        };
        let r = verify_instance(&inst, 1e-10).unwrap();
        assert_eq!(r.conv_residual, 0.0);
        assert!(r.noncollinear);
        assert!(!r.equivalent_pairs);
        assert!(!r.pathology_free);
        assert!(!r.pass);
    }

    #[test]
    fn generated_instance_passes_and_tampering_fails() {
        let inst = gen_sparse_instance(&set(&[3, 4]), &set(&[4]), 7, 6, 3).unwrap();
        let r = verify_instance(&inst, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");

        let mut bad = inst.clone();
        bad.pair2.y[1] += 1e-3;
        let r = verify_instance(&bad, 1e-10).unwrap();
        assert!(r.conv_residual > 1e-10 && !r.pass);

        let mut scaled = inst.clone();
        scaled.pair2 = SignalPair {
            x: inst.pair1.x.iter().map(|v| 2.0 * v).collect(),
            y: inst.pair1.y.iter().map(|v| v / 2.0).collect(),
        };
        let r = verify_instance(&scaled, 1e-10).unwrap();
        assert!(r.equivalent_pairs && !r.pass);
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric() {
        let inst = gen_sparse_instance(&set(&[3]), &set(&[3]), 6, 6, 0).unwrap();
        let (x, y) = (&inst.pair1.x, &inst.pair1.y);
        assert!(scaling_equivalent(x, y, x, y, 1e-12));
        let xs: Vec<f64> = x.iter().map(|v| -3.0 * v).collect();
        let ys: Vec<f64> = y.iter().map(|v| v / -3.0).collect();
        assert!(scaling_equivalent(x, y, &xs, &ys, 1e-12));
        assert!(scaling_equivalent(&xs, &ys, x, y, 1e-12));
        let (xp, yp) = (&inst.pair2.x, &inst.pair2.y);
        assert_eq!(scaling_equivalent(x, y, xp, yp, 1e-10), scaling_equivalent(xp, yp, x, y, 1e-10));
    }

    #[test]
    fn probe_minimal_sparse_family() {
        let fam = Family::sparse(set(&[3]), set(&[3]), 5, 5);
        let r = estimate_unidentifiable_dim(&fam, 5, 1).unwrap();
        assert_eq!(r.claimed, 5);
        assert_eq!(r.measured_post_quotient, 5);
        assert_eq!(r.measured_pre_quotient, 6);
        assert!(r.agreement);
        assert!(estimate_unidentifiable_dim(&fam, 0, 1).is_err());
    }

    #[test]
    fn probe_rank_is_step_invariant() {
        let fam = Family::sparse(set(&[3, 4]), set(&[3]), 7, 6);
        let plan = fam.plan().unwrap();
        let point = plan.sample_point(&mut rng::rng(2)).unwrap();
        let a = jacobian_rank(&fam, &point, 1e-5, 1e-6).unwrap();
        let b = jacobian_rank(&fam, &point, 5e-6, 1e-6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 7 + 6 - 3 - 2);
    }

    #[test]
    fn ill_conditioned_point_is_reported() {
        let fam = Family::sparse(set(&[3]), set(&[3]), 5, 5);
        let plan = fam.plan().unwrap();
        let mut point = plan.sample_point(&mut rng::rng(0)).unwrap();
        let k = point.len();
        point[k - 2] = std::f64::consts::FRAC_PI_2;
        assert!(matches!(jacobian_rank(&fam, &point, 1e-5, 1e-6), Err(Error::IllConditionedPoint(_))));
    }

    #[test]
    fn zero_x_free_y_claim() {
        let fam = Family { m: 11, n: 7, x: SideSpec::Zero { lambda: set(&reference::SPARSE_LAMBDA) }, y: SideSpec::Unconstrained };
        let r = estimate_unidentifiable_dim(&fam, 5, 4).unwrap();
        assert_eq!(r.claimed, 11);
        assert!(r.agreement, "{r:?}");
    }
}
