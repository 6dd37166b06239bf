//! Certified unidentifiable instances.
//!
//! Every generator follows the same recipe. Draw `u in R^(m-1)`,
//! `v in R^(n-1)` and two angles, then set
//!
//! ```text
//! x  = R_theta(u),  y  = -R_phi(v)
//! x' = R_phi(u),    y' = -R_theta(v)
//! ```
//!
//! where `R_g(w) = cos(g) (w; 0) - sin(g) (0; w)`. Both pairs then share one
//! convolution, because `x y^T - x' y'^T` is `sin(phi - theta)` times the
//! rank-two null matrix built from `(u, v)`. The cone constraints become
//! linear conditions on the entries of `u` and `v` indexed by
//! `Lambda ∪ (Lambda - 1)`, which the side planners below solve.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cones::{classify_pair, p_of, ConeSpec, IndexSet, PairTypeKind, SAMPLE_MARGIN};
use crate::conv::convolve;
use crate::error::{invalid, Error, Result};
use crate::linalg::{collinearity_ratio, max_abs_diff, norm2, norm_inf};
use crate::quotient::{self, reconstruct};
use crate::rng::{self, Rng};

/// Tolerance used to classify code vectors inside the generators.
pub const CLASSIFY_TOL: f64 = 1e-9;
/// Largest admissible consistency residual for coded sides.
pub const CONSISTENCY_TOL: f64 = 1e-10;
const MAX_TRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SignalPair {
    pub fn convolution(&self) -> Result<Vec<f64>> {
        convolve(&self.x, &self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleParams {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: f64,
    pub phi: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c1p: Option<f64>,
    pub c2p: Option<f64>,
}

impl InstanceParams {
    pub fn angles(&self) -> AngleParams {
        AngleParams { theta: self.theta, phi: self.phi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialInstance {
    pub m: usize,
    pub n: usize,
    pub pair1: SignalPair,
    pub pair2: SignalPair,
    pub params: InstanceParams,
    pub cones: (ConeSpec, ConeSpec),
    pub claimed_dim: usize,
}

fn rotate(w: &[f64], gamma: f64) -> Vec<f64> {
    reconstruct(w, gamma)
}

fn neg(w: Vec<f64>) -> Vec<f64> {
    w.into_iter().map(|v| -v).collect()
}

/// `x = cos(theta) (u; 0) - sin(theta) (0; u)`, `y = sin(phi) (0; v) - cos(phi) (v; 0)`.
pub fn build_pair_from_params(u: &[f64], v: &[f64], theta: f64, phi: f64) -> SignalPair {
    SignalPair { x: rotate(u, theta), y: neg(rotate(v, phi)) }
}

/// The companion pair: the angles of `x` and `y` are exchanged.
pub fn certificate_from_params(u: &[f64], v: &[f64], theta: f64, phi: f64) -> SignalPair {
    build_pair_from_params(u, v, phi, theta)
}

/// Distance from `a` to the lattice `offset + k * period`.
fn lattice_distance(a: f64, offset: f64, period: f64) -> f64 {
    let t = (a - offset) / period;
    (t - t.round()).abs() * period
}

/// Side of the construction: how `x` (or `y`) is constrained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SideSpec {
    /// Only the endpoint conditions.
    Unconstrained,
    /// Zero on `lambda`.
    Zero { lambda: IndexSet },
    /// Collinear with `b` on `lambda`; the pair must be of type 0, 1 or 2.
    Coded { lambda: IndexSet, b: Vec<f64> },
}

/// Generator family: dimensions plus one side description per signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub m: usize,
    pub n: usize,
    pub x: SideSpec,
    pub y: SideSpec,
}

impl Family {
    pub fn sparse(lambda1: IndexSet, lambda2: IndexSet, m: usize, n: usize) -> Self {
        Self { m, n, x: SideSpec::Zero { lambda: lambda1 }, y: SideSpec::Zero { lambda: lambda2 } }
    }

    pub fn coded(lambda1: IndexSet, b: Vec<f64>, lambda2: IndexSet, bp: Vec<f64>, m: usize, n: usize) -> Self {
        let side = |lambda: IndexSet, b: Vec<f64>| {
            if lambda.is_empty() && b.is_empty() {
                SideSpec::Unconstrained
            } else {
                SideSpec::Coded { lambda, b }
            }
        };
        Self { m, n, x: side(lambda1, b), y: side(lambda2, bp) }
    }

    pub fn plan(&self) -> Result<FamilyPlan> {
        Ok(FamilyPlan {
            m: self.m,
            n: self.n,
            x: SidePlan::new(&self.x, self.m)?,
            y: SidePlan::new(&self.y, self.n)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SideKind {
    Unconstrained,
    Zero,
    Type1 { b_angle: f64 },
    Type2,
}

#[derive(Clone, Debug)]
struct SidePlan {
    d: usize,
    kind: SideKind,
    lambda: IndexSet,
    b: Vec<f64>,
    /// 0-based positions of `u` that are not fixed by the cone.
    free: Vec<usize>,
    p: usize,
}

impl SidePlan {
    fn new(spec: &SideSpec, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(invalid("signal length must be at least 2"));
        }
        let (kind, lambda, b) = match spec {
            SideSpec::Unconstrained => (SideKind::Unconstrained, IndexSet::empty(), Vec::new()),
            SideSpec::Zero { lambda } => {
                if d < 5 || lambda.is_empty() || !lambda.within(3, d - 2) {
                    return Err(invalid(format!(
                        "zero set {lambda} must be non-empty and inside 3..={}",
                        d.saturating_sub(2)
                    )));
                }
                (SideKind::Zero, lambda.clone(), vec![0.0; lambda.len()])
            }
            SideSpec::Coded { lambda, b } => {
                let t = classify_pair(lambda, b, d, CLASSIFY_TOL)?;
                let kind = match t.kind {
                    PairTypeKind::Type0 => SideKind::Zero,
                    PairTypeKind::Type1 => SideKind::Type1 { b_angle: t.r.unwrap_or(1.0).atan() },
                    PairTypeKind::Type2 => SideKind::Type2,
                    PairTypeKind::Unclassified => {
                        return Err(Error::UnsupportedType(format!(
                            "code on {lambda} is neither type 0, 1 nor 2"
                        )))
                    }
                };
                (kind, lambda.clone(), b.clone())
            }
        };
        let fixed = lambda.union(&lambda.shift_minus_one());
        let free: Vec<usize> = (1..d).filter(|&j| !fixed.contains(j)).map(|j| j - 1).collect();
        let plan = Self { d, kind, p: p_of(&lambda), lambda, b, free };
        plan.check_endpoints()?;
        Ok(plan)
    }

    /// Fixed endpoints of `u` must not be forced to zero.
    fn check_endpoints(&self) -> Result<()> {
        if matches!(self.kind, SideKind::Unconstrained) {
            return Ok(());
        }
        let d = self.d;
        for (k, j) in self.lambda.iter().enumerate() {
            let touches = j == 2 || j == d - 1;
            if touches && self.b[k] == 0.0 {
                return Err(Error::InfeasibleSpec(format!(
                    "code vanishes at index {j}, forcing a zero endpoint"
                )));
            }
        }
        Ok(())
    }

    fn n_scalars(&self) -> usize {
        match self.kind {
            SideKind::Type1 { .. } => 1,
            SideKind::Type2 => 2,
            _ => 0,
        }
    }

    fn n_params(&self) -> usize {
        self.free.len() + self.n_scalars()
    }

    fn t(&self) -> usize {
        match self.kind {
            SideKind::Type1 { .. } => 1,
            SideKind::Type2 => 2,
            _ => 0,
        }
    }

    fn p(&self) -> usize {
        if matches!(self.kind, SideKind::Unconstrained) { 0 } else { self.p }
    }

    fn is_coded(&self) -> bool {
        matches!(self.kind, SideKind::Type1 { .. } | SideKind::Type2)
    }

    fn cone(&self) -> Result<ConeSpec> {
        match self.kind {
            SideKind::Unconstrained => ConeSpec::unconstrained(self.d),
            SideKind::Zero => ConeSpec::zero(self.lambda.clone(), self.d),
            _ => ConeSpec::coded(self.lambda.clone(), self.b.clone(), self.d),
        }
    }

    /// Scale pair `(c, c')` from the free scalars.
    fn scales(&self, scalars: &[f64], own: f64, cert: f64) -> Option<(f64, f64)> {
        match self.kind {
            SideKind::Type1 { b_angle } => {
                let c1 = scalars[0];
                Some((c1, c1 * (cert - b_angle).sin() / (own - b_angle).sin()))
            }
            SideKind::Type2 => Some((scalars[0], scalars[1])),
            _ => None,
        }
    }

    /// Assemble `u` so that `sign * R_own(u)` equals `c b` on `Lambda` and
    /// `sign * R_cert(u)` equals `c' b` there.
    fn build(&self, free_vals: &[f64], scalars: &[f64], own: f64, cert: f64, sign: f64) -> (Vec<f64>, Option<(f64, f64)>) {
        let mut u = vec![0.0; self.d - 1];
        for (&pos, &val) in self.free.iter().zip(free_vals) {
            u[pos] = val;
        }
        let scales = self.scales(scalars, own, cert);
        if let Some((c1, c2)) = scales {
            let (alpha, beta) = coded_weights(sign * c1, sign * c2, own, cert);
            for (k, j) in self.lambda.iter().enumerate() {
                u[j - 2] = beta * self.b[k];
            }
            for (k, j) in self.lambda.iter().enumerate() {
                u[j - 1] = alpha * self.b[k];
            }
        }
        (u, scales)
    }
}

/// `(alpha, beta)` with `u(Lambda) = alpha b`, `u(Lambda - 1) = beta b` for a
/// side whose signal uses angle `own` and whose certificate uses `cert`.
pub fn coded_weights(c1: f64, c2: f64, own: f64, cert: f64) -> (f64, f64) {
    let den = (cert - own).sin();
    (
        (c1 * cert.sin() - c2 * own.sin()) / den,
        (c1 * cert.cos() - c2 * own.cos()) / den,
    )
}

/// Worst violation of `u(Lambda) = alpha b` and `u(Lambda - 1) = beta b`,
/// relative to `max(1, ||u||_inf)`.
fn side_consistency(u: &[f64], lambda: &IndexSet, b: &[f64], alpha: f64, beta: f64) -> f64 {
    let mut worst = 0.0f64;
    for (k, j) in lambda.iter().enumerate() {
        worst = worst.max((u[j - 1] - alpha * b[k]).abs());
        worst = worst.max((u[j - 2] - beta * b[k]).abs());
    }
    worst / norm_inf(u).max(1.0)
}

/// Result of evaluating a family at one parameter point.
#[derive(Clone, Debug)]
pub struct Realized {
    pub params: InstanceParams,
    pub pair1: SignalPair,
    pub pair2: SignalPair,
}

/// Validated family ready for sampling and evaluation.
///
/// Parameter vectors are laid out as: free entries of `u`, scalars of the
/// `x` side, free entries of `v`, scalars of the `y` side, `theta`, `phi`.
#[derive(Clone, Debug)]
pub struct FamilyPlan {
    m: usize,
    n: usize,
    x: SidePlan,
    y: SidePlan,
}

impl FamilyPlan {
    pub fn n_params(&self) -> usize {
        self.x.n_params() + self.y.n_params() + 2
    }

    /// `m + n - 1 - p - p' + t + t'`.
    pub fn claimed_dim(&self) -> usize {
        (self.m + self.n - 1 + self.x.t() + self.y.t()) - self.x.p() - self.y.p()
    }

    /// Coded families only promise a lower bound on their dimension.
    pub fn claim_is_lower_bound(&self) -> bool {
        self.x.is_coded() || self.y.is_coded()
    }

    pub fn cones(&self) -> Result<(ConeSpec, ConeSpec)> {
        Ok((self.x.cone()?, self.y.cone()?))
    }

    /// Distance of the angles to the excluded sets.
    pub fn angle_margin(&self, theta: f64, phi: f64) -> f64 {
        let mut m = lattice_distance(theta, 0.0, FRAC_PI_2)
            .min(lattice_distance(phi, 0.0, FRAC_PI_2))
            .min(lattice_distance(theta - phi, 0.0, PI));
        for side in [&self.x, &self.y] {
            if let SideKind::Type1 { b_angle } = side.kind {
                m = m.min(lattice_distance(theta, b_angle, PI)).min(lattice_distance(phi, b_angle, PI));
            }
        }
        m
    }

    /// Evaluate the family. Points closer than `margin` to an excluded angle
    /// are rejected as ill-conditioned.
    pub fn evaluate(&self, point: &[f64], margin: f64) -> Result<Realized> {
        if point.len() != self.n_params() {
            return Err(invalid(format!(
                "parameter vector has length {}, expected {}",
                point.len(),
                self.n_params()
            )));
        }
        let (theta, phi) = (point[point.len() - 2], point[point.len() - 1]);
        if self.angle_margin(theta, phi) < margin {
            return Err(Error::IllConditionedPoint(format!(
                "angles ({theta}, {phi}) within {margin} of an excluded set"
            )));
        }
        let (xf, rest) = point.split_at(self.x.free.len());
        let (xs, rest) = rest.split_at(self.x.n_scalars());
        let (yf, rest) = rest.split_at(self.y.free.len());
        let ys = &rest[..self.y.n_scalars()];
        let (u, cx) = self.x.build(xf, xs, theta, phi, 1.0);
        let (v, cy) = self.y.build(yf, ys, phi, theta, -1.0);
        let params = InstanceParams {
            u,
            v,
            theta,
            phi,
            c1: cx.map(|c| c.0),
            c2: cx.map(|c| c.1),
            c1p: cy.map(|c| c.0),
            c2p: cy.map(|c| c.1),
        };
        Ok(realize(params))
    }

    /// Map used by the Jacobian probe: parameters to `(x; y)`.
    pub fn signal_map(&self, point: &[f64], margin: f64) -> Result<Vec<f64>> {
        let r = self.evaluate(point, margin)?;
        let mut out = r.pair1.x;
        out.extend(r.pair1.y);
        Ok(out)
    }

    fn sample_side(&self, side: &SidePlan, own: f64, cert: f64, sign: f64, rng: &mut Rng) -> Option<(Vec<f64>, Vec<f64>)> {
        for _ in 0..100 {
            let free: Vec<f64> = side.free.iter().map(|_| normal_with_margin(rng)).collect();
            let scalars: Vec<f64> = match side.kind {
                SideKind::Type1 { .. } => vec![normal_with_margin(rng)],
                SideKind::Type2 => vec![normal_with_margin(rng), normal_with_margin(rng)],
                _ => Vec::new(),
            };
            if let Some((c1, c2)) = side.scales(&scalars, own, cert) {
                let (alpha, beta) = coded_weights(sign * c1, sign * c2, own, cert);
                if c2.abs() < SAMPLE_MARGIN || alpha.abs() < SAMPLE_MARGIN || beta.abs() < SAMPLE_MARGIN {
                    continue;
                }
            }
            let (u, _) = side.build(&free, &scalars, own, cert, sign);
            if u[0].abs() < SAMPLE_MARGIN || u[u.len() - 1].abs() < SAMPLE_MARGIN {
                continue;
            }
            return Some((free, scalars));
        }
        None
    }

    /// Random admissible parameter point.
    pub fn sample_point(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        for _ in 0..MAX_TRIES {
            let theta = rng.random_range(0.0..PI);
            let phi = rng.random_range(0.0..PI);
            if self.angle_margin(theta, phi) < SAMPLE_MARGIN {
                continue;
            }
            let Some((xf, xs)) = self.sample_side(&self.x, theta, phi, 1.0, rng) else { continue };
            let Some((yf, ys)) = self.sample_side(&self.y, phi, theta, -1.0, rng) else { continue };
            let mut point = xf;
            point.extend(xs);
            point.extend(yf);
            point.extend(ys);
            point.push(theta);
            point.push(phi);
            return Ok(point);
        }
        Err(Error::InfeasibleSpec("could not draw an admissible parameter point".into()))
    }
}

fn realize(params: InstanceParams) -> Realized {
    let pair1 = build_pair_from_params(&params.u, &params.v, params.theta, params.phi);
    let pair2 = certificate_from_params(&params.u, &params.v, params.theta, params.phi);
    Realized { params, pair1, pair2 }
}

fn normal_with_margin(rng: &mut Rng) -> f64 {
    loop {
        let v: f64 = rng.sample(StandardNormal);
        if v.abs() >= SAMPLE_MARGIN {
            return v;
        }
    }
}

/// Rescale so that `||x||_2 = 1`, moving the compensating factor onto `y`.
fn normalize(mut p: InstanceParams) -> InstanceParams {
    let nx = norm2(&rotate(&p.u, p.theta));
    if nx > 0.0 && nx.is_finite() {
        p.u.iter_mut().for_each(|e| *e /= nx);
        p.v.iter_mut().for_each(|e| *e *= nx);
        p.c1 = p.c1.map(|c| c / nx);
        p.c2 = p.c2.map(|c| c / nx);
        p.c1p = p.c1p.map(|c| c * nx);
        p.c2p = p.c2p.map(|c| c * nx);
    }
    p
}

fn instance_from_plan(plan: &FamilyPlan, seed: u64) -> Result<AdversarialInstance> {
    let mut rng = rng::rng(seed);
    let point = plan.sample_point(&mut rng)?;
    let raw = plan.evaluate(&point, 0.0)?;
    let r = realize(normalize(raw.params));
    Ok(AdversarialInstance {
        m: plan.m,
        n: plan.n,
        pair1: r.pair1,
        pair2: r.pair2,
        params: r.params,
        cones: plan.cones()?,
        claimed_dim: plan.claimed_dim(),
    })
}

/// Instance over `K0(Lambda1, m) x K0(Lambda2, n)`.
pub fn gen_sparse_instance(lambda1: &IndexSet, lambda2: &IndexSet, m: usize, n: usize, seed: u64) -> Result<AdversarialInstance> {
    if m < 5 || n < 5 {
        return Err(invalid("gen_sparse_instance needs m, n >= 5"));
    }
    let plan = Family::sparse(lambda1.clone(), lambda2.clone(), m, n).plan()?;
    instance_from_plan(&plan, seed)
}

/// Instance over `K_b(Lambda', m) x K_b'(Lambda'', n)`.
///
/// An empty index set together with an empty code leaves that side
/// unconstrained.
pub fn gen_coded_instance(
    lambda1: &IndexSet,
    b: &[f64],
    lambda2: &IndexSet,
    bp: &[f64],
    m: usize,
    n: usize,
    seed: u64,
) -> Result<AdversarialInstance> {
    if m < 3 || n < 3 {
        return Err(invalid("gen_coded_instance needs m, n >= 3"));
    }
    let plan = Family::coded(lambda1.clone(), b.to_vec(), lambda2.clone(), bp.to_vec(), m, n).plan()?;
    let inst = instance_from_plan(&plan, seed)?;
    let resid = consistency_residual(&inst)?;
    if !(resid <= CONSISTENCY_TOL) {
        return Err(Error::InternalConsistency(format!("coded consistency residual {resid:e}")));
    }
    Ok(inst)
}

/// Worst relative violation of the coded consistency equations
/// `u(Lambda) = alpha b`, `u(Lambda - 1) = beta b` (and their `v`
/// counterparts) over both sides. Sides without a code contribute zero.
pub fn consistency_residual(inst: &AdversarialInstance) -> Result<f64> {
    let p = &inst.params;
    let mut worst = 0.0f64;
    if let (ConeSpec::Coded { lambda, b, .. }, Some(c1), Some(c2)) = (&inst.cones.0, p.c1, p.c2) {
        let (alpha, beta) = coded_weights(c1, c2, p.theta, p.phi);
        worst = worst.max(side_consistency(&p.u, lambda, b, alpha, beta));
    }
    if let (ConeSpec::Coded { lambda, b, .. }, Some(c1), Some(c2)) = (&inst.cones.1, p.c1p, p.c2p) {
        let (alpha, beta) = coded_weights(-c1, -c2, p.phi, p.theta);
        worst = worst.max(side_consistency(&p.v, lambda, b, alpha, beta));
    }
    if !worst.is_finite() {
        return Err(Error::InternalConsistency("non-finite consistency residual".into()));
    }
    Ok(worst)
}

/// Instance over `K0(Lambda, m) x R^n` that keeps the supplied `y`.
///
/// `y` is split by the quotient decomposition into `(w*, gamma)`; the first
/// element with an admissible angle provides `v = -w*` and `phi = gamma`.
pub fn gen_mixed_instance(lambda: &IndexSet, m: usize, y: &[f64], seed: u64) -> Result<AdversarialInstance> {
    let n = y.len();
    if m < 5 {
        return Err(invalid("gen_mixed_instance needs m >= 5"));
    }
    if n < 4 || n % 2 != 0 {
        return Err(invalid(format!("gen_mixed_instance needs an even n >= 4, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) || y[0] == 0.0 || y[n - 1] == 0.0 {
        return Err(invalid("y must be finite with nonzero endpoints"));
    }
    let side = SidePlan::new(&SideSpec::Zero { lambda: lambda.clone() }, m)?;
    let elements = quotient::decompose(y, crate::DEFAULT_TOL)?;
    let elem = elements
        .iter()
        .find(|e| lattice_distance(e.gamma, 0.0, FRAC_PI_2) >= SAMPLE_MARGIN)
        .ok_or_else(|| {
            Error::NoCertificateFound(format!(
                "{} quotient elements, none with an admissible angle",
                elements.len()
            ))
        })?;
    let phi = elem.gamma;
    let v: Vec<f64> = elem.w_star.iter().map(|e| -e).collect();
    let mut rng = rng::rng(seed);
    let theta = loop {
        let t = rng.random_range(0.0..PI);
        if lattice_distance(t, 0.0, FRAC_PI_2) >= SAMPLE_MARGIN && lattice_distance(t - phi, 0.0, PI) >= SAMPLE_MARGIN {
            break t;
        }
    };
    let (free, _) = {
        let mut found = None;
        for _ in 0..MAX_TRIES {
            let free: Vec<f64> = side.free.iter().map(|_| normal_with_margin(&mut rng)).collect();
            let (u, _) = side.build(&free, &[], theta, phi, 1.0);
            if u[0].abs() >= SAMPLE_MARGIN && u[u.len() - 1].abs() >= SAMPLE_MARGIN {
                found = Some((free, ()));
                break;
            }
        }
        found.ok_or_else(|| Error::InfeasibleSpec("could not draw u".into()))?
    };
    let (mut u, _) = side.build(&free, &[], theta, phi, 1.0);
    let nx = norm2(&rotate(&u, theta));
    u.iter_mut().for_each(|e| *e /= nx);
    let x = rotate(&u, theta);
    let cert = certificate_from_params(&u, &v, theta, phi);
    Ok(AdversarialInstance {
        m,
        n,
        pair1: SignalPair { x, y: y.to_vec() },
        pair2: cert,
        params: InstanceParams { u, v, theta, phi, c1: None, c2: None, c1p: None, c2p: None },
        cones: (side.cone()?, ConeSpec::unconstrained(n)?),
        claimed_dim: m + n - 1 - side.p(),
    })
}

/// Rotate two pairs with a common convolution into a one-parameter-per-angle
/// family of pairs that still share a convolution.
pub fn rotational_family(
    x1: &[f64],
    y1: &[f64],
    x2: &[f64],
    y2: &[f64],
    theta: f64,
    phi: f64,
) -> Result<(SignalPair, SignalPair)> {
    if x1.len() != x2.len() || y1.len() != y2.len() {
        return Err(invalid("rotational_family: mismatched lengths"));
    }
    let z1 = convolve(x1, y1)?;
    let z2 = convolve(x2, y2)?;
    let scale = norm_inf(&z1).max(f64::MIN_POSITIVE);
    if max_abs_diff(&z1, &z2) > crate::DEFAULT_TOL * scale {
        return Err(invalid("rotational_family: seed pairs do not share a convolution"));
    }
    if collinearity_ratio(x1, x2) <= crate::DEFAULT_TOL {
        return Err(invalid("rotational_family: x1 and x2 are collinear"));
    }
    if lattice_distance(theta - phi, 0.0, PI) <= crate::DEFAULT_TOL {
        return Err(invalid("rotational_family: theta and phi coincide modulo pi"));
    }
    let mix = |a: &[f64], ca: f64, b: &[f64], cb: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p * ca - q * cb).collect()
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let first = SignalPair { x: mix(x1, ct, x2, st), y: mix(y1, sp, y2, cp) };
    let second = SignalPair { x: mix(x1, cp, x2, sp), y: mix(y1, st, y2, ct) };
    Ok((first, second))
}

/// Closed form of the common convolution of [`rotational_family`]:
/// `z0 sin(theta + phi) - (x2 * y1) sin(theta) sin(phi) - (x1 * y2) cos(theta) cos(phi)`.
pub fn rotational_closed_form(x1: &[f64], y1: &[f64], x2: &[f64], y2: &[f64], theta: f64, phi: f64) -> Result<Vec<f64>> {
    let z0 = convolve(x1, y1)?;
    let a = convolve(x2, y1)?;
    let b = convolve(x1, y2)?;
    let (s, c) = ((theta + phi).sin(), (theta.sin() * phi.sin(), theta.cos() * phi.cos()));
    Ok(z0
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(z, (p, q))| z * s - p * c.0 - q * c.1)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::member;
    use crate::conv::rank2_null_matrix;
    use crate::linalg::outer;
    use crate::reference;

    fn set(v: &[usize]) -> IndexSet {
        IndexSet::new(v.iter().copied()).unwrap()
    }

    fn conv_gap(inst: &AdversarialInstance) -> f64 {
        let z1 = inst.pair1.convolution().unwrap();
        let z2 = inst.pair2.convolution().unwrap();
        max_abs_diff(&z1, &z2) / norm_inf(&z1)
    }

    #[test]
    fn pair_map_boundaries() {
        let u = [0.3, -1.2, 0.7, 2.0];
        let v = [1.5, -0.4];
        let p = build_pair_from_params(&u, &v, 0.0, FRAC_PI_2);
        assert_eq!(p.x, vec![0.3, -1.2, 0.7, 2.0, 0.0]);
        assert!(max_abs_diff(&p.y, &[0.0, 1.5, -0.4]) < 1e-15);
        let (th, ph) = (0.4, 1.3);
        let p = build_pair_from_params(&u, &v, th, ph);
        assert_eq!(p.x[0], th.cos() * u[0]);
        assert_eq!(p.x[4], -th.sin() * u[3]);
        let c = certificate_from_params(&u, &v, th, ph);
        let back = certificate_from_params(&u, &v, ph, th);
        assert_eq!(back, p);
        assert_eq!(certificate_from_params(&u, &v, th, th), build_pair_from_params(&u, &v, th, th));
        assert_ne!(c, p);
    }

    #[test]
    fn certificate_shares_convolution() {
        let mut r = rng::rng(42);
        let u: Vec<f64> = (0..5).map(|_| r.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..6).map(|_| r.sample(StandardNormal)).collect();
        let (th, ph) = (0.7, 2.1);
        let p = build_pair_from_params(&u, &v, th, ph);
        let c = certificate_from_params(&u, &v, th, ph);
        let gap = max_abs_diff(&p.convolution().unwrap(), &c.convolution().unwrap());
        assert!(gap <= 1e-12);
        // x y^T - x' y'^T = sin(phi - theta) Q(u, v)
        let diff = outer(&p.x, &p.y) - outer(&c.x, &c.y);
        let q = rank2_null_matrix(&u, &v).unwrap() * (ph - th).sin();
        assert!((diff - q).abs().max() <= 1e-12);
    }

    #[test]
    fn sparse_instance_minimal() {
        let inst = gen_sparse_instance(&set(&[3]), &set(&[3]), 5, 5, 1).unwrap();
        assert_eq!(inst.claimed_dim, 5);
        assert_eq!(inst.pair1.x[2], 0.0);
        assert_eq!(inst.pair2.x[2], 0.0);
        assert_eq!(inst.pair1.y[2], 0.0);
        assert!((norm2(&inst.pair1.x) - 1.0).abs() < 1e-14);
        assert!(conv_gap(&inst) <= 1e-12);
        assert_eq!(inst, gen_sparse_instance(&set(&[3]), &set(&[3]), 5, 5, 1).unwrap());
        let p = &inst.params;
        let diff = outer(&inst.pair1.x, &inst.pair1.y) - outer(&inst.pair2.x, &inst.pair2.y);
        let q = rank2_null_matrix(&p.u, &p.v).unwrap() * (p.phi - p.theta).sin();
        assert!((diff - q).abs().max() <= 1e-10);
    }

    #[test]
    fn sparse_preconditions() {
        assert!(gen_sparse_instance(&set(&[2]), &set(&[3]), 6, 6, 0).is_err());
        assert!(gen_sparse_instance(&set(&[5]), &set(&[3]), 6, 6, 0).is_err());
        assert!(gen_sparse_instance(&IndexSet::empty(), &set(&[3]), 6, 6, 0).is_err());
        assert!(gen_sparse_instance(&set(&[3]), &set(&[3]), 4, 6, 0).is_err());
    }

    #[test]
    fn sparse_reference_configuration() {
        let l = set(&reference::SPARSE_LAMBDA);
        let inst = gen_sparse_instance(&l, &set(&[3]), 11, 7, 9).unwrap();
        for j in l.iter() {
            assert_eq!(inst.pair1.x[j - 1], 0.0);
            assert_eq!(inst.pair2.x[j - 1], 0.0);
        }
        assert_eq!(inst.claimed_dim, 11 + 7 - 1 - 6 - 2);
    }

    #[test]
    fn coded_repetition_with_zero_partner() {
        let l1 = set(&[2, 3, 5]);
        let l2 = set(&[3, 4]);
        let inst = gen_coded_instance(&l1, &[1.0; 3], &l2, &[0.0, 0.0], 8, 7, 5).unwrap();
        // Type 1 (t = 1) and type 0: m + n - p1 - p2.
        assert_eq!(inst.claimed_dim, 8 + 7 - p_of(&l1) - p_of(&l2));
        assert!(matches!(inst.cones.1, ConeSpec::Zero { .. }));
        assert_eq!(inst.pair1.y[2], 0.0);
        assert_eq!(inst.pair1.y[3], 0.0);
        let x = &inst.pair1.x;
        assert!((x[1] - x[2]).abs() < 1e-14 && (x[1] - x[4]).abs() < 1e-14);
        assert!(consistency_residual(&inst).unwrap() <= 1e-12);
        assert!(conv_gap(&inst) <= 1e-12);
    }

    #[test]
    fn coded_geometric_partner() {
        let l2 = set(&[3, 4, 5]);
        let g = crate::cones::geometric_profile(&l2, 0.5, 8).unwrap();
        let l1 = set(&[4]);
        let inst = gen_coded_instance(&l1, &[1.0], &l2, g.code().unwrap(), 7, 8, 2).unwrap();
        // p2 = |Lambda2| + 1, t' = 1; x side is a type 2 singleton.
        assert_eq!(inst.claimed_dim, 7 + 8 - 1 - 2 - 4 + 2 + 1);
        assert!(member(&inst.pair2.y, &inst.cones.1, 1e-10).unwrap());
        assert!(consistency_residual(&inst).unwrap() <= 1e-12);
    }

    #[test]
    fn fig3_code_generates() {
        let r = 5.0 / 3.0;
        let b = [0.5, 0.5 * r, -0.3, -0.3 * r, -0.3 * r * r, -0.15];
        let l = set(&reference::CODED_LAMBDA);
        let inst = gen_coded_instance(&l, &b, &set(&[4]), &[1.0], 14, 8, 3).unwrap();
        for (w, c) in [(&inst.pair1.x, &inst.cones.0), (&inst.pair2.x, &inst.cones.0)] {
            assert!(member(w, c, 1e-10).unwrap());
        }
        assert!(consistency_residual(&inst).unwrap() <= 1e-10);
        // The printed, rounded code is rejected at the generator tolerance.
        let err = gen_coded_instance(&l, &reference::CODED_B, &set(&[4]), &[1.0], 14, 8, 3);
        assert!(matches!(err, Err(Error::UnsupportedType(_))));
    }

    #[test]
    fn coded_errors() {
        let err = gen_coded_instance(&set(&[2, 3, 4]), &[1.0, 2.0, 1.0], &set(&[3]), &[1.0], 7, 6, 0);
        assert!(matches!(err, Err(Error::UnsupportedType(_))));
        let err = gen_coded_instance(&set(&[2, 4]), &[0.0, 1.0], &set(&[3]), &[1.0], 7, 6, 0);
        assert!(matches!(err, Err(Error::InfeasibleSpec(_))));
        assert!(gen_coded_instance(&set(&[1]), &[1.0], &set(&[3]), &[1.0], 7, 6, 0).is_err());
    }

    #[test]
    fn mixed_keeps_y() {
        let mut r = rng::rng(8);
        let y: Vec<f64> = (0..6).map(|_| r.sample(StandardNormal)).collect();
        let inst = gen_mixed_instance(&set(&[3, 4]), 8, &y, 4).unwrap();
        assert_eq!(inst.pair1.y, y);
        assert!(conv_gap(&inst) <= 1e-10);
        assert_eq!(inst.claimed_dim, 8 + 6 - 1 - 3);
        let y1 = reference::to_f64(&reference::Y1);
        assert!(matches!(gen_mixed_instance(&set(&[3]), 8, &y1, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rotational_reference() {
        let (x1, y1) = (reference::to_f64(&reference::X1), reference::to_f64(&reference::Y1));
        let (x2, y2) = (reference::to_f64(&reference::X2), reference::to_f64(&reference::Y2));
        let (a, b) = rotational_family(&x1, &y1, &x2, &y2, 0.3, 1.1).unwrap();
        let za = a.convolution().unwrap();
        let zb = b.convolution().unwrap();
        let zc = rotational_closed_form(&x1, &y1, &x2, &y2, 0.3, 1.1).unwrap();
        assert!(max_abs_diff(&za, &zb) <= 1e-12);
        assert!(max_abs_diff(&za, &zc) <= 1e-12);
        let zero = ConeSpec::zero(set(&reference::SPARSE_LAMBDA), 11).unwrap();
        assert!(member(&a.x, &zero, 0.0).unwrap());
        assert!(member(&b.x, &zero, 0.0).unwrap());
        assert!(rotational_family(&x1, &y1, &x2, &y2, 0.5, 0.5).is_err());
        assert!(rotational_family(&x1, &y1, &x1, &y2, 0.3, 1.1).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = gen_coded_instance(&set(&[2, 3]), &[1.0, -0.5], &IndexSet::empty(), &[], 6, 5, 11).unwrap();
        let js = serde_json::to_string(&inst).unwrap();
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        for key in ["m", "n", "pair1", "pair2", "params", "cones", "claimed_dim"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["cones"].is_array());
        assert!(v["params"]["theta"].is_number());
        let back: AdversarialInstance = serde_json::from_str(&js).unwrap();
        assert_eq!(back, inst);
    }
}
