//! Exact machinery for hard-core distributions on matchings: enumeration,
//! partition functions and marginals, activity fitting, activity-bound
//! measurement, the list-driven marginal construction, and correlation-decay
//! probing.
//!
//! Everything is generic over [`Value`], instantiated with `f64` for speed
//! or `BigRational` for exact verification.

use crate::graph::{EdgeId, MultiGraph, VertexId};
use crate::polytope::{self, PolytopeVerdict};
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Sub};

/// Hard cap on edge counts for partition-function work: the memo is keyed
/// on a 32-bit residual-edge mask.
pub const EDGE_CAP: usize = 30;
/// Edge cap for the correlation-decay probe (pattern enumeration on top of
/// conditioned partition functions).
pub const PROBE_EDGE_CAP: usize = 24;
/// Default fitting tolerance (sup-norm distance of marginals from target).
pub const FIT_TOL: f64 = 1e-10;
/// Default fitting iteration budget.
pub const FIT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchingError {
    #[error("{edges} edges exceeds the cap of {cap}")]
    OverEdgeCap { edges: usize, cap: usize },
    #[error("{vertices} vertices exceeds the odd-set cap of {cap}")]
    OverVertexCap { vertices: usize, cap: usize },
    #[error("activity for edge {0} is negative or non-finite")]
    BadActivity(EdgeId),
    #[error("marginal for edge {0} is negative or non-finite")]
    BadMarginal(EdgeId),
    #[error("edge {0} has zero activity where a positive one is required")]
    ZeroActivity(EdgeId),
    #[error("expected {expected} per-edge values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("scale must lie in (0, 1]")]
    BadScale,
    #[error("list for edge {0} is empty")]
    EmptyList(EdgeId),
    #[error("distance parameter must be at least 1")]
    BadDistance,
}

/// Scalar used for probabilities and activities.  `slop()` is the
/// comparison tolerance for boundary tests: zero in exact mode.
pub trait Value:
    Clone
    + std::fmt::Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_rational(r: Rational64) -> Self;
    fn slop() -> Self;
    fn is_valid(&self) -> bool;
    fn abs_value(&self) -> Self;
}

impl Value for f64 {
    fn from_rational(r: Rational64) -> Self {
        *r.numer() as f64 / *r.denom() as f64
    }
    fn slop() -> Self {
        1e-9
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Value for BigRational {
    fn from_rational(r: Rational64) -> Self {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }
    fn slop() -> Self {
        BigRational::zero()
    }
    fn is_valid(&self) -> bool {
        true
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}

/// All matchings of `H` (including the empty one), each a sorted list of
/// edge ids, in a deterministic order.
pub fn enumerate_matchings(h: &MultiGraph) -> Result<Vec<Vec<EdgeId>>, MatchingError> {
    let cache = ZCache::<f64>::masks_only(h)?;
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn recurse(
        cache: &ZCache<f64>,
        alive: u32,
        current: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
    ) {
        if alive == 0 {
            out.push(current.clone());
            return;
        }
        let e = alive.trailing_zeros() as usize;
        recurse(cache, alive & !(1 << e), current, out);
        current.push(e);
        recurse(cache, alive & !cache.conflict[e], current, out);
        current.pop();
    }
    recurse(&cache, cache.full_mask(), &mut current, &mut out);
    out.sort();
    Ok(out)
}

/// Memoized partition functions over residual edge sets.  `z(alive)` is the
/// total activity-weight of matchings using only edges in `alive`:
/// `Z = Σ_M Π_{e∈M} λ(e)`, with the empty matching contributing 1.
pub struct ZCache<'a, T: Value> {
    lambda: &'a [T],
    /// Closed conflict neighbourhood: edge `e` plus all edges sharing an
    /// endpoint with it.
    conflict: Vec<u32>,
    m: usize,
    memo: HashMap<u32, T>,
}

impl<'a, T: Value> ZCache<'a, T> {
    pub fn new(h: &'a MultiGraph, lambda: &'a [T]) -> Result<Self, MatchingError> {
        let mut cache = Self::masks_only(h)?;
        if lambda.len() != h.edge_count() {
            return Err(MatchingError::LengthMismatch {
                expected: h.edge_count(),
                got: lambda.len(),
            });
        }
        for (e, l) in lambda.iter().enumerate() {
            if !l.is_valid() || *l < T::zero() {
                return Err(MatchingError::BadActivity(e));
            }
        }
        cache.lambda = lambda;
        Ok(cache)
    }

    fn masks_only(h: &MultiGraph) -> Result<ZCache<'a, T>, MatchingError> {
        let m = h.edge_count();
        if m > EDGE_CAP {
            return Err(MatchingError::OverEdgeCap {
                edges: m,
                cap: EDGE_CAP,
            });
        }
        let mut conflict = vec![0u32; m];
        for e in 0..m {
            let (u, v) = h.endpoints(e);
            for &f in h.incident_edges(u).iter().chain(h.incident_edges(v)) {
                conflict[e] |= 1 << f;
            }
            conflict[e] |= 1 << e;
        }
        Ok(ZCache {
            lambda: &[],
            conflict,
            m,
            memo: HashMap::new(),
        })
    }

    pub fn full_mask(&self) -> u32 {
        if self.m == 32 {
            u32::MAX
        } else {
            (1u32 << self.m) - 1
        }
    }

    pub fn conflict_mask(&self, e: EdgeId) -> u32 {
        self.conflict[e]
    }

    /// Partition function restricted to the `alive` edge set, by the
    /// deletion/contraction recursion `Z(A) = Z(A−e) + λ(e)·Z(A−N[e])` on
    /// the lowest-index alive edge.
    pub fn z(&mut self, alive: u32) -> T {
        if alive == 0 {
            return T::one();
        }
        if let Some(v) = self.memo.get(&alive) {
            return v.clone();
        }
        let e = alive.trailing_zeros() as usize;
        let without = self.z(alive & !(1 << e));
        let contracted = self.z(alive & !self.conflict[e]);
        let value = without + self.lambda[e].clone() * contracted;
        self.memo.insert(alive, value.clone());
        value
    }

    /// `Pr(e ∈ M)` under the hard-core distribution restricted to `alive`;
    /// zero when `e` is not alive.
    pub fn marginal(&mut self, e: EdgeId, alive: u32) -> T {
        if alive & (1 << e) == 0 {
            return T::zero();
        }
        let numer = self.lambda[e].clone() * self.z(alive & !self.conflict[e]);
        numer / self.z(alive)
    }
}

/// Partition function and per-edge marginals for the hard-core distribution
/// with the given activities.
pub fn partition_and_marginals<T: Value>(
    h: &MultiGraph,
    lambda: &[T],
) -> Result<(T, Vec<T>), MatchingError> {
    let mut cache = ZCache::new(h, lambda)?;
    let full = cache.full_mask();
    let z = cache.z(full);
    let marginals = (0..h.edge_count())
        .map(|e| cache.marginal(e, full))
        .collect();
    Ok((z, marginals))
}

/// A hard-core distribution on the matchings of `h`, with the partition
/// function and marginals cached at construction.
#[derive(Debug, Clone)]
pub struct HardCoreModel<T: Value> {
    h: MultiGraph,
    lambda: Vec<T>,
    z: T,
    marginals: Vec<T>,
}

impl<T: Value> HardCoreModel<T> {
    pub fn new(h: MultiGraph, lambda: Vec<T>) -> Result<Self, MatchingError> {
        let (z, marginals) = partition_and_marginals(&h, &lambda)?;
        Ok(HardCoreModel {
            h,
            lambda,
            z,
            marginals,
        })
    }

    pub fn graph(&self) -> &MultiGraph {
        &self.h
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn z(&self) -> &T {
        &self.z
    }

    pub fn marginals(&self) -> &[T] {
        &self.marginals
    }
}

/// Attached to a fitting failure: the strict-interior verdict on the target
/// (often the explanation), the final iterate, and its sup-norm deviation.
#[derive(Debug, Clone)]
pub struct FitFailure<T: Value> {
    pub strict: PolytopeVerdict<T>,
    pub last_lambda: Vec<T>,
    pub deviation: T,
}

#[derive(Debug, Clone)]
pub enum FitError<T: Value> {
    Invalid(MatchingError),
    NonConvergence(Box<FitFailure<T>>),
}

impl<T: Value> std::fmt::Display for FitError<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitError::Invalid(e) => write!(f, "{e}"),
            FitError::NonConvergence(fail) => write!(
                f,
                "activity fitting did not converge (deviation {:?}; target strictly interior: {})",
                fail.deviation, fail.strict.inside
            ),
        }
    }
}

impl<T: Value> std::error::Error for FitError<T> {}

impl<T: Value> From<MatchingError> for FitError<T> {
    fn from(e: MatchingError) -> Self {
        FitError::Invalid(e)
    }
}

/// Strict-interior test used by `fit_activities`.  Odd sets are enumerated
/// only up to the vertex cap; above it the verdict covers the vertex
/// conditions alone.
fn strict_interior_verdict<T: Value>(h: &MultiGraph, x: &[T]) -> PolytopeVerdict<T> {
    if h.vertex_count() <= polytope::VERTEX_CAP {
        return polytope::in_matching_polytope_strict(h, x, Rational64::one())
            .expect("caps checked");
    }
    polytope::vertex_conditions_only(h, x, Rational64::one(), true)
}

/// Fit hard-core activities whose marginals reproduce `target` within
/// `tol` in sup-norm.
///
/// The target is tested for strict interiority first (the existence
/// condition for such activities); the iteration runs regardless and the
/// verdict rides along on failure, since near-boundary targets are exactly
/// the ones that stall.  Updates are damped multiplicative corrections
/// `λ(e) ← λ(e)·(1 + target(e)/current(e))/2`, which halve the step and
/// stay inside the rationals in exact mode; the initial guess is
/// `target(e)/(1 − Σ_{f∋u, f≠e} target(f))` clipped to `[1e-6, 1e6]`.
pub fn fit_activities<T: Value>(
    h: &MultiGraph,
    target: &[T],
    tol: T,
    max_iter: usize,
) -> Result<HardCoreModel<T>, FitError<T>> {
    let m = h.edge_count();
    if target.len() != m {
        return Err(MatchingError::LengthMismatch {
            expected: m,
            got: target.len(),
        }
        .into());
    }
    for (e, t) in target.iter().enumerate() {
        if !t.is_valid() || *t < T::zero() {
            return Err(MatchingError::BadActivity(e).into());
        }
    }
    let strict = strict_interior_verdict(h, target);

    let lo = T::from_rational(Rational64::new(1, 1_000_000));
    let hi = T::from_rational(Rational64::new(1_000_000, 1));
    let half = T::from_rational(Rational64::new(1, 2));
    let mut lambda: Vec<T> = (0..m)
        .map(|e| {
            let (u, _) = h.endpoints(e);
            let mut free = T::one();
            for &f in h.incident_edges(u) {
                if f != e {
                    free = free - target[f].clone();
                }
            }
            let guess = if free > T::zero() {
                target[e].clone() / free
            } else {
                hi.clone()
            };
            if guess < lo {
                lo.clone()
            } else if guess > hi {
                hi.clone()
            } else {
                guess
            }
        })
        .collect();

    let mut deviation = T::zero();
    for _ in 0..=max_iter {
        let (_, current) = partition_and_marginals(h, &lambda)?;
        deviation = current
            .iter()
            .zip(target)
            .map(|(c, t)| (c.clone() - t.clone()).abs_value())
            .fold(T::zero(), |acc, d| if d > acc { d } else { acc });
        if deviation <= tol {
            return Ok(HardCoreModel {
                h: h.clone(),
                z: partition_and_marginals(h, &lambda)?.0,
                marginals: current,
                lambda,
            });
        }
        for e in 0..m {
            let factor = (T::one() + target[e].clone() / current[e].clone()) * half.clone();
            let next = lambda[e].clone() * factor;
            // Confining the iterates to a fixed box keeps runaway
            // activities finite when the target is infeasible, so such
            // fits end in NonConvergence rather than a validation error.
            lambda[e] = if next < lo {
                lo.clone()
            } else if next > hi {
                hi.clone()
            } else {
                next
            };
        }
    }
    Err(FitError::NonConvergence(Box::new(FitFailure {
        strict,
        last_lambda: lambda,
        deviation,
    })))
}

/// Empirical activity bounds: the largest `λ(e)/x(e)` and the largest
/// per-vertex activity sum.  Tracked against the interior depth `delta`
/// (the distribution is expected to sit inside `(1−δ)·MP`).
#[derive(Debug, Clone)]
pub struct ActivityBoundReport<T: Value> {
    pub delta: Rational64,
    pub max_ratio: T,
    pub max_vertex_sum: T,
    pub beta_hat: T,
}

pub fn activity_bound_report<T: Value>(
    model: &HardCoreModel<T>,
    delta: Rational64,
) -> ActivityBoundReport<T> {
    let mut max_ratio = T::zero();
    for e in 0..model.h.edge_count() {
        if model.marginals[e] > T::zero() {
            let ratio = model.lambda[e].clone() / model.marginals[e].clone();
            if ratio > max_ratio {
                max_ratio = ratio;
            }
        }
    }
    let mut max_vertex_sum = T::zero();
    for v in 0..model.h.vertex_count() {
        let sum = model
            .h
            .incident_edges(v)
            .iter()
            .fold(T::zero(), |acc, &e| acc + model.lambda[e].clone());
        if sum > max_vertex_sum {
            max_vertex_sum = sum;
        }
    }
    let beta_hat = if max_ratio > max_vertex_sum {
        max_ratio.clone()
    } else {
        max_vertex_sum.clone()
    };
    ActivityBoundReport {
        delta,
        max_ratio,
        max_vertex_sum,
        beta_hat,
    }
}

/// Verdicts for the list-driven marginal construction
/// `x_e = (1 + ε/2)/|L(e)|`: the per-edge list-size lower bound, the
/// odd-set degree-deficiency bound, and actual polytope membership are
/// reported independently — at desk scale the first two do not guarantee
/// the third.
#[derive(Debug, Clone)]
pub struct ListMarginalsReport {
    pub x: Vec<Rational64>,
    pub condition1_ok: bool,
    pub condition1_failures: Vec<EdgeId>,
    pub condition2_ok: bool,
    pub condition2_witness: Option<Vec<VertexId>>,
    pub polytope: PolytopeVerdict<BigRational>,
}

/// Build `x_e = (1 + ε/2)/|L(e)|` from list sizes and check:
///
/// 1. `|L(e)| ≥ (3/2 + ε)Δ − (Δ − d(v)) − (Δ − d(w)) − 3√Δ` per edge
///    (square roots compared exactly on squares);
/// 2. `Σ_{v∈X}(Δ − d(v)) − e(X, V∖X) ≤ ε|X|Δ/10` for every odd `X`;
/// 3. membership of `x` in the matching polytope (exact arithmetic).
pub fn marginals_from_lists(
    h: &MultiGraph,
    list_sizes: &[u64],
    epsilon: Rational64,
    delta: u64,
) -> Result<ListMarginalsReport, MatchingError> {
    let m = h.edge_count();
    let n = h.vertex_count();
    if list_sizes.len() != m {
        return Err(MatchingError::LengthMismatch {
            expected: m,
            got: list_sizes.len(),
        });
    }
    if n > polytope::VERTEX_CAP {
        return Err(MatchingError::OverVertexCap {
            vertices: n,
            cap: polytope::VERTEX_CAP,
        });
    }
    for (e, &l) in list_sizes.iter().enumerate() {
        if l == 0 {
            return Err(MatchingError::EmptyList(e));
        }
    }
    let one = Rational64::one();
    let x: Vec<Rational64> = list_sizes
        .iter()
        .map(|&l| (one + epsilon / 2) / Rational64::from_integer(l as i64))
        .collect();

    let d = Rational64::from_integer(delta as i64);
    let mut condition1_failures = Vec::new();
    for e in 0..m {
        let (v, w) = h.endpoints(e);
        // t = |L(e)| + (Δ−d(v)) + (Δ−d(w)) − (3/2+ε)Δ must be ≥ −3√Δ.
        let t = Rational64::from_integer(list_sizes[e] as i64)
            + (d - Rational64::from_integer(h.degree(v) as i64))
            + (d - Rational64::from_integer(h.degree(w) as i64))
            - (Rational64::new(3, 2) + epsilon) * d;
        let ok = t >= Rational64::zero() || t * t <= Rational64::from_integer(9) * d;
        if !ok {
            condition1_failures.push(e);
        }
    }

    let deficiency: Vec<Rational64> = (0..n)
        .map(|v| d - Rational64::from_integer(h.degree(v) as i64))
        .collect();
    let mut condition2_witness = None;
    'outer: for mask in 1u32..(1u32 << n) {
        if mask.count_ones() % 2 == 0 {
            continue;
        }
        let mut lhs = Rational64::zero();
        for v in 0..n {
            if mask >> v & 1 == 1 {
                lhs += deficiency[v];
            }
        }
        for &(a, b) in h.edges() {
            if (mask >> a & 1) != (mask >> b & 1) {
                lhs -= one;
            }
        }
        let rhs = epsilon * Rational64::from_integer(mask.count_ones() as i64) * d
            / Rational64::from_integer(10);
        if lhs > rhs {
            condition2_witness = Some((0..n).filter(|&v| mask >> v & 1 == 1).collect());
            break 'outer;
        }
    }

    let x_big: Vec<BigRational> = x.iter().map(|&r| BigRational::from_rational(r)).collect();
    let polytope = polytope::in_matching_polytope(h, &x_big, Rational64::one())?;

    Ok(ListMarginalsReport {
        x,
        condition1_ok: condition1_failures.is_empty(),
        condition1_failures,
        condition2_ok: condition2_witness.is_none(),
        condition2_witness,
        polytope,
    })
}

/// Result of exact conditioning on all matching patterns over the edges at
/// distance ≥ `t` from a reference edge.
#[derive(Debug, Clone)]
pub struct DecayProbe<T: Value> {
    pub t: u32,
    pub distant_edges: Vec<EdgeId>,
    pub patterns: usize,
    pub max_deviation: T,
}

/// Distance between two edges: the smallest vertex distance between an
/// endpoint of one and an endpoint of the other (0 when they share a
/// vertex).
pub fn edge_distance(h: &MultiGraph, e: EdgeId, f: EdgeId) -> Option<u32> {
    let (eu, ev) = h.endpoints(e);
    let (fu, fv) = h.endpoints(f);
    let mut best: Option<u32> = None;
    for src in [eu, ev] {
        let dist = h.bfs_distances(src, None);
        for tgt in [fu, fv] {
            if let Some(d) = dist[tgt] {
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
    }
    best
}

/// For every matching pattern `S` on the edges at distance ≥ `t` from `e`,
/// compute `Pr(e ∈ M | M ∩ D = S) / Pr(e ∈ M)` exactly and report the
/// largest `|ratio − 1|`.  Patterns touching a zero-activity edge have
/// probability zero and are skipped.
pub fn correlation_decay_probe<T: Value>(
    model: &HardCoreModel<T>,
    e: EdgeId,
    t: u32,
) -> Result<DecayProbe<T>, MatchingError> {
    let h = model.graph();
    let m = h.edge_count();
    if m > PROBE_EDGE_CAP {
        return Err(MatchingError::OverEdgeCap {
            edges: m,
            cap: PROBE_EDGE_CAP,
        });
    }
    if t == 0 {
        return Err(MatchingError::BadDistance);
    }
    if !(model.marginals[e] > T::zero()) {
        return Err(MatchingError::ZeroActivity(e));
    }
    let distant_edges: Vec<EdgeId> = (0..m)
        .filter(|&f| edge_distance(h, e, f).is_none_or(|d| d >= t))
        .collect();
    let mut d_mask = 0u32;
    for &f in &distant_edges {
        d_mask |= 1 << f;
    }

    let mut cache = ZCache::new(h, model.lambda())?;
    let full = cache.full_mask();
    let base = cache.marginal(e, full);

    // Enumerate matchings inside the distant set.
    let mut patterns_mask: Vec<u32> = Vec::new();
    fn patterns(conflict: &[u32], alive: u32, chosen: u32, out: &mut Vec<u32>) {
        if alive == 0 {
            out.push(chosen);
            return;
        }
        let f = alive.trailing_zeros() as usize;
        patterns(conflict, alive & !(1 << f), chosen, out);
        patterns(conflict, alive & !conflict[f], chosen | (1 << f), out);
    }
    patterns(&cache.conflict, d_mask, 0, &mut patterns_mask);
    patterns_mask.sort_unstable();

    let mut max_deviation = T::zero();
    let mut counted = 0usize;
    'pattern: for &s in &patterns_mask {
        let mut alive = full & !d_mask;
        let mut bits = s;
        while bits != 0 {
            let f = bits.trailing_zeros() as usize;
            if !(model.lambda()[f] > T::zero()) {
                continue 'pattern;
            }
            alive &= !cache.conflict_mask(f);
            bits &= bits - 1;
        }
        counted += 1;
        let conditional = cache.marginal(e, alive);
        let deviation = (conditional / base.clone() - T::one()).abs_value();
        if deviation > max_deviation {
            max_deviation = deviation;
        }
    }
    Ok(DecayProbe {
        t,
        distant_edges,
        patterns: counted,
        max_deviation,
    })
}
