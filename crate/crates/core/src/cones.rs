//! Index-set algebra and the feasible cone families.
//!
//! All index sets are 1-based, matching how positions inside a signal are
//! usually written down: index `j` refers to `w[j - 1]`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{collinearity_ratio, dot, norm_inf};
use crate::rng::{self, Rng};

/// Margin below which a sampled "nonzero" entry or scale is redrawn.
pub const SAMPLE_MARGIN: f64 = 1e-3;
const MAX_REDRAWS: usize = 10_000;

/// Sorted set of distinct 1-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        if v.contains(&0) {
            return Err(invalid("index sets are 1-based; 0 is not a valid index"));
        }
        v.sort_unstable();
        let before = v.len();
        v.dedup();
        if v.len() != before {
            return Err(invalid("index set contains duplicates"));
        }
        Ok(Self(v))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{lo, lo+1, ..., hi}`; empty when `lo > hi`.
    pub fn range(lo: usize, hi: usize) -> Self {
        assert!(lo >= 1, "index sets are 1-based");
        Self((lo..=hi).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn min(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// True when every index lies in `lo..=hi`.
    pub fn within(&self, lo: usize, hi: usize) -> bool {
        self.0.iter().all(|&j| j >= lo && j <= hi)
    }

    pub fn is_contiguous(&self) -> bool {
        self.0.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Minkowski sum with `{-1}`. Indices that would fall below 1 are dropped.
    pub fn shift_minus_one(&self) -> Self {
        Self(self.0.iter().filter(|&&j| j > 1).map(|&j| j - 1).collect())
    }

    /// Minkowski sum with `{+1}`.
    pub fn shift_plus_one(&self) -> Self {
        Self(self.0.iter().map(|&j| j + 1).collect())
    }

    pub fn union(&self, other: &Self) -> Self {
        let s: BTreeSet<usize> = self.iter().chain(other.iter()).collect();
        Self(s.into_iter().collect())
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self(self.iter().filter(|&j| other.contains(j)).collect())
    }

    /// 1-based positions within `self` of the elements of `subset`.
    pub fn positions_of(&self, subset: &Self) -> Self {
        Self(
            subset
                .iter()
                .filter_map(|j| self.0.binary_search(&j).ok().map(|p| p + 1))
                .collect(),
        )
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

pub fn shift_minus_one(lambda: &IndexSet) -> IndexSet {
    lambda.shift_minus_one()
}

/// `|Lambda ∪ (Lambda - 1)|`.
pub fn p_of(lambda: &IndexSet) -> usize {
    lambda.union(&lambda.shift_minus_one()).len()
}

/// Feasible cone in `R^d`. Every family excludes vectors with a zero first
/// or last entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConeSpec", into = "RawConeSpec")]
pub enum ConeSpec {
    /// `K(∅, d)`: only the endpoint conditions.
    Unconstrained { d: usize },
    /// `K0(Lambda, d)`: zero on `Lambda`.
    Zero { d: usize, lambda: IndexSet },
    /// `K_b(Lambda, d)`: `w(Lambda) = c * b` for some `c != 0`.
    Coded { d: usize, lambda: IndexSet, b: Vec<f64> },
}

impl ConeSpec {
    pub fn unconstrained(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("cone dimension must be positive"));
        }
        Ok(Self::Unconstrained { d })
    }

    pub fn zero(lambda: IndexSet, d: usize) -> Result<Self> {
        check_lambda(&lambda, d)?;
        Ok(Self::Zero { d, lambda })
    }

    /// Coded cone; an all-zero code collapses to the zero cone.
    pub fn coded(lambda: IndexSet, b: Vec<f64>, d: usize) -> Result<Self> {
        check_lambda(&lambda, d)?;
        if b.len() != lambda.len() {
            return Err(invalid(format!(
                "code length {} does not match |Lambda| = {}",
                b.len(),
                lambda.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("code vector must be finite"));
        }
        if b.iter().all(|&v| v == 0.0) {
            return Ok(Self::Zero { d, lambda });
        }
        Ok(Self::Coded { d, lambda, b })
    }

    /// Repetition-coded cone `K1(Lambda, d)`.
    pub fn repetition(lambda: IndexSet, d: usize) -> Result<Self> {
        let b = vec![1.0; lambda.len()];
        Self::coded(lambda, b, d)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Unconstrained { d } | Self::Zero { d, .. } | Self::Coded { d, .. } => *d,
        }
    }

    pub fn lambda(&self) -> Option<&IndexSet> {
        match self {
            Self::Unconstrained { .. } => None,
            Self::Zero { lambda, .. } | Self::Coded { lambda, .. } => Some(lambda),
        }
    }

    pub fn code(&self) -> Option<&[f64]> {
        match self {
            Self::Coded { b, .. } => Some(b),
            _ => None,
        }
    }

    /// Coded cone whose code is collinear with the all-ones vector.
    pub fn is_repetition(&self, tol: f64) -> bool {
        match self {
            Self::Coded { b, .. } => collinearity_ratio(b, &vec![1.0; b.len()]) <= tol,
            _ => false,
        }
    }
}

fn check_lambda(lambda: &IndexSet, d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("cone dimension must be positive"));
    }
    if !lambda.within(1, d) {
        return Err(invalid(format!("index set {lambda} not contained in 1..={d}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ConeKind {
    Zero,
    Coded,
    Unconstrained,
}

#[derive(Serialize, Deserialize)]
struct RawConeSpec {
    kind: ConeKind,
    d: usize,
    #[serde(default)]
    lambda: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
}

impl TryFrom<RawConeSpec> for ConeSpec {
    type Error = Error;
    fn try_from(raw: RawConeSpec) -> Result<Self> {
        let lambda = IndexSet::new(raw.lambda)?;
        match raw.kind {
            ConeKind::Unconstrained => {
                if !lambda.is_empty() {
                    return Err(invalid("unconstrained cone takes no index set"));
                }
                Self::unconstrained(raw.d)
            }
            ConeKind::Zero => Self::zero(lambda, raw.d),
            ConeKind::Coded => {
                let b = raw.b.ok_or_else(|| invalid("coded cone requires a code vector b"))?;
                Self::coded(lambda, b, raw.d)
            }
        }
    }
}

impl From<ConeSpec> for RawConeSpec {
    fn from(c: ConeSpec) -> Self {
        match c {
            ConeSpec::Unconstrained { d } => RawConeSpec {
                kind: ConeKind::Unconstrained,
                d,
                lambda: Vec::new(),
                b: None,
            },
            ConeSpec::Zero { d, lambda } => RawConeSpec {
                kind: ConeKind::Zero,
                d,
                lambda: lambda.into(),
                b: None,
            },
            ConeSpec::Coded { d, lambda, b } => RawConeSpec {
                kind: ConeKind::Coded,
                d,
                lambda: lambda.into(),
                b: Some(b),
            },
        }
    }
}

fn gather(w: &[f64], lambda: &IndexSet) -> Vec<f64> {
    lambda.iter().map(|j| w[j - 1]).collect()
}

/// Least-squares scale `c` of `w(Lambda)` along `b`.
pub fn code_scale(w: &[f64], lambda: &IndexSet, b: &[f64]) -> f64 {
    let wl = gather(w, lambda);
    let bb = dot(b, b);
    if bb == 0.0 {
        0.0
    } else {
        dot(&wl, b) / bb
    }
}

/// Cone membership with tolerance `tol`.
///
/// Endpoints must satisfy `|w(1)|, |w(d)| > tol`. The zero cone further needs
/// `||w(Lambda)||_inf <= tol`; the coded cone needs the least-squares scale
/// `c` along `b` to satisfy `|c| > tol` and
/// `||w(Lambda) - c b||_inf <= tol (1 + |c| ||b||_inf)`.
pub fn member(w: &[f64], spec: &ConeSpec, tol: f64) -> Result<bool> {
    let d = spec.dim();
    if w.len() != d {
        return Err(invalid(format!("vector length {} does not match cone dimension {d}", w.len())));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Ok(false);
    }
    if !(w[0].abs() > tol && w[d - 1].abs() > tol) {
        return Ok(false);
    }
    Ok(match spec {
        ConeSpec::Unconstrained { .. } => true,
        ConeSpec::Zero { lambda, .. } => norm_inf(&gather(w, lambda)) <= tol,
        ConeSpec::Coded { lambda, b, .. } => {
            let c = code_scale(w, lambda, b);
            let wl = gather(w, lambda);
            let resid = wl.iter().zip(b).fold(0.0f64, |acc, (x, bi)| acc.max((x - c * bi).abs()));
            c.abs() > tol && resid <= tol * (1.0 + c.abs() * norm_inf(b))
        }
    })
}

/// Seeded draw from a cone.
pub fn sample(spec: &ConeSpec, seed: u64) -> Result<Vec<f64>> {
    sample_with(spec, &mut rng::rng(seed))
}

/// Draw from a cone: free entries i.i.d. standard normal, endpoints and the
/// code scale redrawn while smaller than [`SAMPLE_MARGIN`] in magnitude.
pub fn sample_with(spec: &ConeSpec, rng: &mut Rng) -> Result<Vec<f64>> {
    let d = spec.dim();
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    for idx in [0, d - 1] {
        let mut tries = 0;
        while w[idx].abs() < SAMPLE_MARGIN {
            w[idx] = rng.sample(StandardNormal);
            tries += 1;
            if tries > MAX_REDRAWS {
                return Err(Error::InfeasibleSpec("endpoint redraw limit reached".into()));
            }
        }
    }
    match spec {
        ConeSpec::Unconstrained { .. } => {}
        ConeSpec::Zero { lambda, .. } => {
            if lambda.contains(1) || lambda.contains(d) {
                return Err(Error::InfeasibleSpec(format!(
                    "zero set {lambda} contains an endpoint of 1..={d}"
                )));
            }
            for j in lambda.iter() {
                w[j - 1] = 0.0;
            }
        }
        ConeSpec::Coded { lambda, b, .. } => {
            let endpoint_codes: Vec<f64> = lambda
                .iter()
                .zip(b)
                .filter(|(j, _)| *j == 1 || *j == d)
                .map(|(_, &bj)| bj)
                .collect();
            if endpoint_codes.iter().any(|&bj| bj == 0.0) {
                return Err(Error::InfeasibleSpec(
                    "code vanishes on an endpoint index".into(),
                ));
            }
            let mut tries = 0;
            let c = loop {
                let c: f64 = rng.sample(StandardNormal);
                if c.abs() >= SAMPLE_MARGIN
                    && endpoint_codes.iter().all(|bj| (c * bj).abs() >= SAMPLE_MARGIN)
                {
                    break c;
                }
                tries += 1;
                if tries > MAX_REDRAWS {
                    return Err(Error::InfeasibleSpec("code scale redraw limit reached".into()));
                }
            };
            for (j, bj) in lambda.iter().zip(b) {
                w[j - 1] = c * bj;
            }
        }
    }
    Ok(w)
}

/// Categories of `(Lambda, b)` pairs that govern the coded constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairTypeKind {
    Type0,
    Type1,
    Type2,
    Unclassified,
}

impl PairTypeKind {
    /// Extra dimension `t` contributed by the type; `None` when unclassified.
    pub fn t(self) -> Option<usize> {
        match self {
            Self::Type0 => Some(0),
            Self::Type1 => Some(1),
            Self::Type2 => Some(2),
            Self::Unclassified => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairType {
    pub kind: PairTypeKind,
    /// Positions within `Lambda` of `Lambda ∩ (Lambda - 1)`; type 1 only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<IndexSet>,
    /// Ratio with `b(Lambda* + 1) = r b(Lambda*)`; type 1 only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl PairType {
    fn plain(kind: PairTypeKind) -> Self {
        Self { kind, lambda_star: None, r: None }
    }
}

/// Classify `(Lambda, b)` into type 0, 1, 2 or unclassified.
///
/// Collinearity of two rows is decided by `sigma_2 <= tol * sigma_1` of the
/// stacked `2 x k` matrix. A type-1 candidate whose ratio `r` is zero or
/// unbounded is left unclassified.
pub fn classify_pair(lambda: &IndexSet, b: &[f64], d: usize, tol: f64) -> Result<PairType> {
    if d < 3 {
        return Err(invalid("classify_pair: d must be at least 3"));
    }
    if lambda.is_empty() || !lambda.within(2, d - 1) {
        return Err(invalid(format!(
            "classify_pair: Lambda = {lambda} must be non-empty and inside 2..={}",
            d - 1
        )));
    }
    if b.len() != lambda.len() {
        return Err(invalid("classify_pair: |b| must equal |Lambda|"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(invalid("classify_pair: code vector must be finite"));
    }
    let bmax = norm_inf(b);
    if bmax <= tol {
        let kind = if d >= 5 && lambda.within(3, d - 2) {
            PairTypeKind::Type0
        } else {
            PairTypeKind::Unclassified
        };
        return Ok(PairType::plain(kind));
    }
    let overlap = lambda.intersection(&lambda.shift_minus_one());
    if overlap.is_empty() {
        return Ok(PairType::plain(PairTypeKind::Type2));
    }
    let star = lambda.positions_of(&overlap);
    let head: Vec<f64> = star.iter().map(|p| b[p - 1]).collect();
    let tail: Vec<f64> = star.iter().map(|p| b[p]).collect();
    let type1 = |r: f64| PairType {
        kind: PairTypeKind::Type1,
        lambda_star: Some(star.clone()),
        r: Some(r),
    };
    if collinearity_ratio(b, &vec![1.0; b.len()]) <= tol {
        return Ok(type1(1.0));
    }
    let hmax = norm_inf(&head);
    if hmax <= tol * bmax || collinearity_ratio(&head, &tail) > tol {
        return Ok(PairType::plain(PairTypeKind::Unclassified));
    }
    let r = dot(&tail, &head) / dot(&head, &head);
    if r.abs() <= tol {
        return Ok(PairType::plain(PairTypeKind::Unclassified));
    }
    Ok(type1(r))
}

/// Geometrically decaying code `b = (1, r, r^2, ...)` on a contiguous index set.
pub fn geometric_profile(lambda: &IndexSet, r: f64, d: usize) -> Result<ConeSpec> {
    if lambda.is_empty() || !lambda.is_contiguous() {
        return Err(invalid("geometric_profile: Lambda must be non-empty and contiguous"));
    }
    if !(r.is_finite() && r != 0.0 && r.abs() < 1.0) {
        return Err(invalid(format!("geometric_profile: need 0 < |r| < 1, got {r}")));
    }
    let b: Vec<f64> = (0..lambda.len()).map(|k| r.powi(k as i32)).collect();
    ConeSpec::coded(lambda.clone(), b, d)
}

/// Random index set drawn from `lo..=hi` with each index kept with
/// probability `density`; retried until non-empty.
pub fn random_index_set(lo: usize, hi: usize, density: f64, rng: &mut Rng) -> Result<IndexSet> {
    if lo > hi {
        return Err(invalid(format!("random_index_set: empty range {lo}..={hi}")));
    }
    loop {
        let set: Vec<usize> = (lo..=hi).filter(|_| rng.random_bool(density)).collect();
        if !set.is_empty() {
            return IndexSet::new(set);
        }
    }
}

/// Random `(Lambda, b)` of the requested type in dimension `d`.
///
/// Type 1 codes follow a common ratio along every run of consecutive indices,
/// which is exactly the collinearity of `b(Lambda*)` and `b(Lambda* + 1)`.
pub fn random_typed_pair(kind: PairTypeKind, d: usize, rng: &mut Rng) -> Result<(IndexSet, Vec<f64>)> {
    let normal_away_from_zero = |rng: &mut Rng| loop {
        let v: f64 = rng.sample(StandardNormal);
        if v.abs() >= 0.1 {
            break v;
        }
    };
    match kind {
        PairTypeKind::Type0 => {
            if d < 5 {
                return Err(invalid("type 0 needs d >= 5"));
            }
            let lambda = random_index_set(3, d - 2, 0.4, rng)?;
            let b = vec![0.0; lambda.len()];
            Ok((lambda, b))
        }
        PairTypeKind::Type2 => {
            if d < 3 {
                return Err(invalid("type 2 needs d >= 3"));
            }
            // No two adjacent indices.
            let lambda = loop {
                let mut set = Vec::new();
                let mut j = 2;
                while j <= d - 1 {
                    if rng.random_bool(0.45) {
                        set.push(j);
                        j += 2;
                    } else {
                        j += 1;
                    }
                }
                if !set.is_empty() {
                    break IndexSet::new(set)?;
                }
            };
            let b = (0..lambda.len()).map(|_| normal_away_from_zero(rng)).collect();
            Ok((lambda, b))
        }
        PairTypeKind::Type1 => {
            if d < 4 {
                return Err(invalid("type 1 needs d >= 4"));
            }
            let lambda = loop {
                let cand = random_index_set(2, d - 1, 0.5, rng)?;
                if !cand.intersection(&cand.shift_minus_one()).is_empty() {
                    break cand;
                }
            };
            let r = if rng.random_bool(0.3) {
                1.0
            } else {
                let mag = rng.random_range(0.3..1.8);
                if rng.random_bool(0.5) { mag } else { -mag }
            };
            let mut b = Vec::with_capacity(lambda.len());
            let idx = lambda.as_slice();
            for k in 0..idx.len() {
                if k > 0 && idx[k] == idx[k - 1] + 1 {
                    let prev = b[k - 1];
                    b.push(r * prev);
                } else {
                    b.push(normal_away_from_zero(rng));
                }
            }
            Ok((lambda, b))
        }
        PairTypeKind::Unclassified => Err(invalid("cannot draw an unclassified pair")),
    }
}
