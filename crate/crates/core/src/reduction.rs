//! The structural reduction engine: removable vertices, the patched graph
//! `G_1` that absorbs a removed set, and the search for either a
//! low-square-degree removable vertex (outcome A) or a removable subdivided
//! multigraph with balanced boundary (outcome B).
//!
//! All threshold comparisons (`Δ^{1/4}`, `Δ^{7/8}`, `Δ^{9/10}`, `Δ/2`) are
//! exact integer arithmetic; no floating point is involved anywhere.

use crate::arith::{floor_pow_frac, pow_cmp};
use crate::graph::{MinorLog, MinorOp, MultiGraph, VertexId};
use crate::mincut::max_weight_minus_cut;
use num_rational::Rational64;
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("epsilon must lie in (0, 1/4]")]
    BadEpsilon,
    #[error("delta must lie in 1..=10000")]
    BadDelta,
    #[error("vertex {vertex} has degree {degree}, above the delta parameter")]
    DegreeExceedsDelta { vertex: VertexId, degree: usize },
    #[error("vertex {0} is not removable")]
    NotRemovable(VertexId),
    #[error("vertex {0} has three or more outside neighbours but none of low degree")]
    NoLightNeighbour(VertexId),
    #[error("vertex {0} out of range")]
    BadVertex(VertexId),
    #[error("unreadable report: {0}")]
    BadReport(String),
}

/// The capital Δ parameter and ε, decoupled from the instance's actual
/// maximum degree: callers choose Δ to exercise threshold regimes, subject
/// to Δ ≥ max degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionParams {
    pub delta: u64,
    pub epsilon: Rational64,
}

impl ReductionParams {
    /// Δ is capped at 10⁴ so every eighth-power comparison fits in u128.
    pub fn new(delta: u64, epsilon: Rational64) -> Result<Self, ReductionError> {
        if delta == 0 || delta > 10_000 {
            return Err(ReductionError::BadDelta);
        }
        if epsilon <= Rational64::new(0, 1) || epsilon > Rational64::new(1, 4) {
            return Err(ReductionError::BadEpsilon);
        }
        Ok(ReductionParams { delta, epsilon })
    }

    /// ⌊Δ^{1/4}⌋, the light/heavy degree threshold.
    pub fn t_light(&self) -> u64 {
        floor_pow_frac(self.delta, 1, 4)
    }

    /// ⌊Δ^{9/10}⌋, the boundary slack per removed vertex.  Flooring makes
    /// the violating-set test slightly stricter than the exact irrational
    /// threshold; search and certificate re-check use the same value.
    pub fn t_slack(&self) -> u64 {
        floor_pow_frac(self.delta, 9, 10)
    }

    /// ⌊Δ^{7/8}⌋, the outside-visibility threshold (display only; the
    /// comparison itself is done on eighth powers).
    pub fn t_s0(&self) -> u64 {
        floor_pow_frac(self.delta, 7, 8)
    }

    /// deg > Δ^{1/4} (membership in the heavy set B).
    fn above_quarter(&self, deg: usize) -> bool {
        pow_cmp(deg as u64, 4, self.delta, 1) == Ordering::Greater
    }

    /// deg ≥ Δ^{1/4} (the neighbour condition in the removable predicate).
    fn at_least_quarter(&self, deg: usize) -> bool {
        pow_cmp(deg as u64, 4, self.delta, 1) != Ordering::Less
    }

    /// deg ≥ Δ/2.
    fn at_least_half(&self, deg: usize) -> bool {
        2 * deg as u64 >= self.delta
    }

    /// count > Δ^{7/8}, via count⁸ vs Δ⁷.
    fn above_seven_eighths(&self, count: usize) -> bool {
        pow_cmp(count as u64, 8, self.delta, 7) == Ordering::Greater
    }

    fn check_degrees(&self, g: &MultiGraph) -> Result<(), ReductionError> {
        for v in 0..g.vertex_count() {
            if g.degree(v) as u64 > self.delta {
                return Err(ReductionError::DegreeExceedsDelta {
                    vertex: v,
                    degree: g.degree(v),
                });
            }
        }
        Ok(())
    }
}

fn is_removable(g: &MultiGraph, params: &ReductionParams, v: VertexId) -> bool {
    if pow_cmp(g.degree(v) as u64, 4, params.delta, 1) == Ordering::Greater {
        return false;
    }
    let heavy = g
        .distinct_neighbours(v)
        .iter()
        .filter(|&&w| params.at_least_quarter(g.degree(w)))
        .count();
    heavy <= 2
}

/// Vertices with degree ≤ Δ^{1/4} and at most two neighbours of degree
/// ≥ Δ^{1/4}, in ascending order.
pub fn removable_vertices(
    g: &MultiGraph,
    params: &ReductionParams,
) -> Result<Vec<VertexId>, ReductionError> {
    params.check_degrees(g)?;
    Ok((0..g.vertex_count())
        .filter(|&v| is_removable(g, params, v))
        .collect())
}

/// Result of patching a removable set out of `G`: the graph `G_1` on the
/// remaining vertices, the minor-operation log that produces it from `G`,
/// and the map from `G_1` vertex indices back to original ids.
#[derive(Debug, Clone)]
pub struct PatchOutcome {
    pub graph: MultiGraph,
    pub log: MinorLog,
    pub vertex_map: Vec<VertexId>,
}

/// Remove a set `R` of removable vertices and patch the remainder so that
/// `square(G) − R ⊆ square(G_1)`:
///
/// * a vertex with ≤ 1 neighbour outside `R` is deleted;
/// * a vertex with exactly 2 outside neighbours is deleted and its
///   neighbours joined (if not already adjacent);
/// * a vertex with ≥ 3 outside neighbours is contracted onto an outside
///   neighbour of degree < Δ^{1/4}, chosen to spread contractions across
///   targets (fewest contractions so far, then lowest id) so no target
///   accumulates degree beyond 2⌊Δ^{1/4}⌋.
///
/// Edges inside `R` are deleted first, and parallel edges created by
/// contractions are deleted afterwards, so `G_1` is simple whenever `G` is.
pub fn remove_and_patch(
    g: &MultiGraph,
    r: &[VertexId],
    params: &ReductionParams,
) -> Result<PatchOutcome, ReductionError> {
    params.check_degrees(g)?;
    let n = g.vertex_count();
    let mut in_r = vec![false; n];
    for &v in r {
        if v >= n {
            return Err(ReductionError::BadVertex(v));
        }
        in_r[v] = true;
    }
    for &v in r {
        if !is_removable(g, params, v) {
            return Err(ReductionError::NotRemovable(v));
        }
    }

    // Plan every operation against the original graph: the lemma's
    // construction is simultaneous, so classification and target choice must
    // not depend on execution order.
    enum Plan {
        Delete,
        DeleteAndJoin(VertexId, VertexId),
        ContractOnto(VertexId),
    }
    let mut load = vec![0u32; n];
    let mut plans: Vec<(VertexId, Plan)> = Vec::new();
    let mut sorted_r: Vec<VertexId> = r.to_vec();
    sorted_r.sort_unstable();
    sorted_r.dedup();
    for &v in &sorted_r {
        let outside: Vec<VertexId> = g
            .distinct_neighbours(v)
            .into_iter()
            .filter(|&w| !in_r[w])
            .collect();
        let plan = match outside.len() {
            0 | 1 => Plan::Delete,
            2 => {
                if g.has_edge(outside[0], outside[1]) {
                    Plan::Delete
                } else {
                    Plan::DeleteAndJoin(outside[0], outside[1])
                }
            }
            _ => {
                let target = outside
                    .iter()
                    .copied()
                    .filter(|&w| pow_cmp(g.degree(w) as u64, 4, params.delta, 1) == Ordering::Less)
                    .min_by_key(|&w| (load[w], w))
                    .ok_or(ReductionError::NoLightNeighbour(v))?;
                load[target] += 1;
                Plan::ContractOnto(target)
            }
        };
        plans.push((v, plan));
    }

    // Execute, tracking current ids so the log replays from the original
    // graph.  `cur_of[orig]` is the current index of an original vertex.
    let mut cur = g.clone();
    let mut log: MinorLog = Vec::new();
    let mut cur_of: Vec<Option<VertexId>> = (0..n).map(Some).collect();
    let remove_index = |cur_of: &mut Vec<Option<VertexId>>, gone: VertexId| {
        for slot in cur_of.iter_mut() {
            match slot {
                Some(i) if *i == gone => *slot = None,
                Some(i) if *i > gone => *i -= 1,
                _ => {}
            }
        }
    };
    let apply = |cur: &mut MultiGraph, log: &mut MinorLog, op: MinorOp| {
        *cur = crate::graph::apply_minor_ops(cur, std::slice::from_ref(&op))
            .expect("planned operation references a live id");
        log.push(op);
    };

    // Edges inside R go first so contractions never drag them onto targets.
    loop {
        let inside = cur
            .edges()
            .iter()
            .position(|&(a, b)| in_r[g_id(&cur_of, a)] && in_r[g_id(&cur_of, b)]);
        match inside {
            Some(e) => apply(&mut cur, &mut log, MinorOp::DeleteEdge(e)),
            None => break,
        }
    }

    for (v, plan) in plans {
        let cv = cur_of[v].expect("vertex not yet removed");
        match plan {
            Plan::Delete => {
                apply(&mut cur, &mut log, MinorOp::DeleteVertex(cv));
                remove_index(&mut cur_of, cv);
            }
            Plan::DeleteAndJoin(x, y) => {
                apply(&mut cur, &mut log, MinorOp::DeleteVertex(cv));
                remove_index(&mut cur_of, cv);
                let (cx, cy) = (cur_of[x].unwrap(), cur_of[y].unwrap());
                apply(&mut cur, &mut log, MinorOp::AddEdge(cx, cy));
            }
            Plan::ContractOnto(w) => {
                let cw = cur_of[w].unwrap();
                let e = *cur
                    .incident_edges(cv)
                    .iter()
                    .find(|&&e| cur.other_end(e, cv) == cw)
                    .expect("contraction target is a neighbour");
                apply(
                    &mut cur,
                    &mut log,
                    MinorOp::ContractEdge { edge: e, keep: cw },
                );
                remove_index(&mut cur_of, cv);
            }
        }
    }

    // Contractions can duplicate edges; delete extras one at a time (edge
    // ids shift after each deletion).
    loop {
        let mut seen = BTreeSet::new();
        let dup = cur.edges().iter().position(|&(a, b)| {
            let key = (a.min(b), a.max(b));
            !seen.insert(key)
        });
        match dup {
            Some(e) => apply(&mut cur, &mut log, MinorOp::DeleteEdge(e)),
            None => break,
        }
    }

    let vertex_map: Vec<VertexId> = (0..n).filter(|&v| !in_r[v]).collect();
    debug_assert_eq!(vertex_map.len(), cur.vertex_count());
    Ok(PatchOutcome {
        graph: cur,
        log,
        vertex_map,
    })
}

fn g_id(cur_of: &[Option<VertexId>], cur: VertexId) -> VertexId {
    cur_of
        .iter()
        .position(|&slot| slot == Some(cur))
        .expect("current id maps back to an original vertex")
}

/// Find `Z ⊆ V(H)` maximising
/// `g(Z) = Σ_{v∈Z} boundary(v) − e_H(Z, V∖Z) − slack·|Z|`
/// and return it when the maximum is positive, else `None`.
///
/// `g` is a modular function minus a cut, so the exact maximiser comes from
/// one minimum-cut computation after scaling weights by the slack
/// denominator.
pub fn find_violating_set(
    h: &MultiGraph,
    boundary: &[u64],
    slack: Rational64,
) -> Option<Vec<VertexId>> {
    assert_eq!(boundary.len(), h.vertex_count());
    assert!(slack >= Rational64::new(0, 1), "slack must be non-negative");
    let den = *slack.denom() as i128;
    let num = *slack.numer() as i128;
    let weights: Vec<i128> = boundary.iter().map(|&b| b as i128 * den - num).collect();
    let edges: Vec<(usize, usize, i128)> = h.edges().iter().map(|&(u, v)| (u, v, den)).collect();
    let (best, z) = max_weight_minus_cut(&weights, &edges);
    (best > 0).then_some(z)
}

/// Brute-force oracle for `find_violating_set`, restricted to ≤ 20 vertices.
pub fn find_violating_set_exhaustive(
    h: &MultiGraph,
    boundary: &[u64],
    slack: Rational64,
) -> Option<Vec<VertexId>> {
    let n = h.vertex_count();
    assert!(n <= 20, "exhaustive search is capped at 20 vertices");
    assert_eq!(boundary.len(), n);
    let den = *slack.denom() as i128;
    let num = *slack.numer() as i128;
    let mut best = 0i128;
    let mut best_mask = 0u32;
    for mask in 0u32..(1u32 << n) {
        let mut val = 0i128;
        for v in 0..n {
            if mask >> v & 1 == 1 {
                val += boundary[v] as i128 * den - num;
            }
        }
        for &(u, v) in h.edges() {
            if (mask >> u & 1) != (mask >> v & 1) {
                val -= den;
            }
        }
        if val > best {
            best = val;
            best_mask = mask;
        }
    }
    (best > 0).then(|| (0..n).filter(|&v| best_mask >> v & 1 == 1).collect())
}

/// Outcome A: a removable vertex of low degree in the square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeACertificate {
    pub vertex: VertexId,
    pub square_degree: u64,
}

/// Outcome B: a multigraph `H` whose subdivision sits in `G` with removable
/// core and balanced boundary.  `branch_of[i]` is the `G` vertex playing
/// `H`-vertex `i`; `core_of[e]` is the `G` vertex subdividing `H`-edge `e`;
/// `boundary_degree[i]` is the degree of `branch_of[i]` in `G − core`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreInstance {
    pub h: MultiGraph,
    pub branch_of: Vec<VertexId>,
    pub core_of: Vec<VertexId>,
    pub boundary_degree: Vec<u64>,
}

impl CoreInstance {
    /// The core vertex set `R` in `G` ids, ascending.
    pub fn core_set(&self) -> Vec<VertexId> {
        let mut r = self.core_of.clone();
        r.sort_unstable();
        r.dedup();
        r
    }
}

/// One shrink step of the violating-set iteration: the set `Z` removed from
/// the branch candidates (in `G` ids) together with the terms of the bound
/// it violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationRecord {
    pub removed: Vec<VertexId>,
    pub boundary_sum: u64,
    pub cut_edges: u64,
    pub surplus: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReductionOutcome {
    TypeA(TypeACertificate),
    TypeB(CoreInstance),
    /// The small-Δ regime: candidates ran out before either outcome.  Not a
    /// bug — the guarantee only kicks in above an unquantified Δ_ε.
    NoReduction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub delta: u64,
    pub epsilon: Rational64,
    pub outcome: ReductionOutcome,
    pub iterations: Vec<IterationRecord>,
    /// Vertices where the early-exit premise held but the numeric
    /// square-degree bound did not (never observed; kept as a tripwire).
    pub discrepancies: Vec<VertexId>,
}

/// Run the full reduction pipeline on `G`:
///
/// 1. Scan removable vertices; any that sees at most one vertex of the
///    heavy set `B = {deg > Δ^{1/4}}`, or a `B`-vertex of degree < Δ/2,
///    should have square degree < (3/2)Δ + Δ^{1/2} — verified numerically,
///    not assumed — and yields outcome A.
/// 2. Otherwise build `V_1` (degree ≥ Δ/2, at most Δ^{7/8} neighbours
///    outside the removable set) and `R_1` (removable vertices with exactly
///    two neighbours in `V_1`), and repeatedly delete any set `Z` whose
///    outside degree exceeds its multigraph cut by more than ⌊Δ^{9/10}⌋ per
///    vertex.  When no violating set remains, the surviving subdivided
///    multigraph is outcome B.
pub fn find_reduction(
    g: &MultiGraph,
    params: &ReductionParams,
) -> Result<ReductionReport, ReductionError> {
    params.check_degrees(g)?;
    let n = g.vertex_count();
    let r0 = removable_vertices(g, params)?;
    let mut discrepancies = Vec::new();

    // Early exit A.
    for &v in &r0 {
        let heavy_nbrs: Vec<VertexId> = g
            .distinct_neighbours(v)
            .into_iter()
            .filter(|&w| params.above_quarter(g.degree(w)))
            .collect();
        let premise = heavy_nbrs.len() <= 1
            || heavy_nbrs
                .iter()
                .any(|&w| (2 * g.degree(w) as u64) < params.delta);
        if !premise {
            continue;
        }
        let (d1, d2) = g.dist1_dist2(v);
        let sq = (d1.len() + d2.len()) as u64;
        // sq < (3/2)Δ + √Δ  ⟺  2·sq − 3Δ < 2√Δ, checked on squares.
        let lhs = 2 * sq as i128 - 3 * params.delta as i128;
        let small = lhs < 0 || lhs * lhs < 4 * params.delta as i128;
        if small {
            return Ok(ReductionReport {
                delta: params.delta,
                epsilon: params.epsilon,
                outcome: ReductionOutcome::TypeA(TypeACertificate {
                    vertex: v,
                    square_degree: sq,
                }),
                iterations: Vec::new(),
                discrepancies,
            });
        }
        discrepancies.push(v);
    }

    let in_r0: Vec<bool> = {
        let mut m = vec![false; n];
        for &v in &r0 {
            m[v] = true;
        }
        m
    };

    // V_1: degree ≥ Δ/2 and at most Δ^{7/8} distinct neighbours outside R_0.
    let mut in_v: Vec<bool> = (0..n)
        .map(|v| {
            params.at_least_half(g.degree(v)) && {
                let outside = g
                    .distinct_neighbours(v)
                    .iter()
                    .filter(|&&w| !in_r0[w])
                    .count();
                !params.above_seven_eighths(outside)
            }
        })
        .collect();

    // R_1: removable vertices (outside V_1) with exactly two neighbours in V_1.
    let branch_pair = |in_v: &[bool], r: VertexId| -> Option<(VertexId, VertexId)> {
        let nbrs: Vec<VertexId> = g
            .distinct_neighbours(r)
            .into_iter()
            .filter(|&w| in_v[w])
            .collect();
        match nbrs[..] {
            [a, b] => Some((a, b)),
            _ => None,
        }
    };
    let mut cores: Vec<VertexId> = r0
        .iter()
        .copied()
        .filter(|&r| !in_v[r] && branch_pair(&in_v, r).is_some())
        .collect();

    let slack = Rational64::from_integer(params.t_slack() as i64);
    let mut iterations = Vec::new();
    loop {
        if cores.is_empty() {
            return Ok(ReductionReport {
                delta: params.delta,
                epsilon: params.epsilon,
                outcome: ReductionOutcome::NoReduction,
                iterations,
                discrepancies,
            });
        }
        let branch: Vec<VertexId> = (0..n).filter(|&v| in_v[v]).collect();
        let index_of: Vec<Option<usize>> = {
            let mut m = vec![None; n];
            for (i, &v) in branch.iter().enumerate() {
                m[v] = Some(i);
            }
            m
        };
        let mut h = MultiGraph::with_vertices(branch.len());
        for &r in &cores {
            let (a, b) = branch_pair(&in_v, r).expect("core keeps two branch neighbours");
            h.add_edge(index_of[a].unwrap(), index_of[b].unwrap())
                .expect("branch neighbours are distinct");
        }
        let in_core: Vec<bool> = {
            let mut m = vec![false; n];
            for &r in &cores {
                m[r] = true;
            }
            m
        };
        let boundary: Vec<u64> = branch
            .iter()
            .map(|&v| g.neighbours(v).filter(|&w| !in_core[w]).count() as u64)
            .collect();

        match find_violating_set(&h, &boundary, slack) {
            None => {
                return Ok(ReductionReport {
                    delta: params.delta,
                    epsilon: params.epsilon,
                    outcome: ReductionOutcome::TypeB(CoreInstance {
                        h,
                        branch_of: branch,
                        core_of: cores,
                        boundary_degree: boundary,
                    }),
                    iterations,
                    discrepancies,
                });
            }
            Some(z) => {
                assert!(!z.is_empty(), "a violating set is non-empty");
                let in_z: Vec<bool> = {
                    let mut m = vec![false; branch.len()];
                    for &v in &z {
                        m[v] = true;
                    }
                    m
                };
                let not_z: Vec<bool> = in_z.iter().map(|&b| !b).collect();
                let boundary_sum: u64 = z.iter().map(|&v| boundary[v]).sum();
                let cut_edges = h.edges_between(&in_z, &not_z);
                let surplus = boundary_sum as i64
                    - cut_edges as i64
                    - params.t_slack() as i64 * z.len() as i64;
                iterations.push(IterationRecord {
                    removed: z.iter().map(|&v| branch[v]).collect(),
                    boundary_sum,
                    cut_edges,
                    surplus,
                });
                for &v in &z {
                    in_v[branch[v]] = false;
                }
                cores.retain(|&r| {
                    g.distinct_neighbours(r)
                        .iter()
                        .all(|&w| index_of[w].map_or(true, |i| !in_z[i]))
                });
            }
        }
    }
}

/// Why a claimed core instance fails verification against `G`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreViolation {
    #[error("core vertex {0} is not removable")]
    CoreNotRemovable(VertexId),
    #[error("branch vertex {0} has degree below the quarter-power threshold")]
    BranchTooLight(VertexId),
    #[error("the multigraph has no edges")]
    NoEdges,
    #[error("core vertex {0} does not join its two branch vertices")]
    BadIncidence(VertexId),
    #[error("boundary degree of branch vertex {0} is misstated")]
    WrongBoundary(VertexId),
    #[error("slack bound violated by a branch subset")]
    SlackViolated(Vec<VertexId>),
    #[error("ill-formed instance: {0}")]
    Malformed(String),
}

/// Re-check every invariant of an outcome-B certificate from scratch.
pub fn verify_core_instance(
    g: &MultiGraph,
    params: &ReductionParams,
    core: &CoreInstance,
) -> Result<(), CoreViolation> {
    let n = g.vertex_count();
    let hn = core.h.vertex_count();
    if core.branch_of.len() != hn
        || core.boundary_degree.len() != hn
        || core.core_of.len() != core.h.edge_count()
    {
        return Err(CoreViolation::Malformed("length mismatch".into()));
    }
    for &v in core.branch_of.iter().chain(core.core_of.iter()) {
        if v >= n {
            return Err(CoreViolation::Malformed(format!("vertex {v} out of range")));
        }
    }
    let mut all = core.branch_of.clone();
    all.extend_from_slice(&core.core_of);
    let before = all.len();
    all.sort_unstable();
    all.dedup();
    if all.len() != before {
        return Err(CoreViolation::Malformed(
            "branch and core vertices must be distinct".into(),
        ));
    }
    if core.h.edge_count() == 0 {
        return Err(CoreViolation::NoEdges);
    }
    for &r in &core.core_of {
        if !is_removable(g, params, r) {
            return Err(CoreViolation::CoreNotRemovable(r));
        }
    }
    for &v in &core.branch_of {
        if !params.at_least_quarter(g.degree(v)) {
            return Err(CoreViolation::BranchTooLight(v));
        }
    }
    for (e, &r) in core.core_of.iter().enumerate() {
        let (hu, hv) = core.h.endpoints(e);
        let (gu, gv) = (core.branch_of[hu], core.branch_of[hv]);
        if !g.has_edge(r, gu) || !g.has_edge(r, gv) {
            return Err(CoreViolation::BadIncidence(r));
        }
    }
    let in_core: Vec<bool> = {
        let mut m = vec![false; n];
        for &r in &core.core_of {
            m[r] = true;
        }
        m
    };
    for (i, &v) in core.branch_of.iter().enumerate() {
        let d = g.neighbours(v).filter(|&w| !in_core[w]).count() as u64;
        if d != core.boundary_degree[i] {
            return Err(CoreViolation::WrongBoundary(v));
        }
    }
    let slack = Rational64::from_integer(params.t_slack() as i64);
    if let Some(z) = find_violating_set(&core.h, &core.boundary_degree, slack) {
        return Err(CoreViolation::SlackViolated(
            z.into_iter().map(|v| core.branch_of[v]).collect(),
        ));
    }
    Ok(())
}

/// Line-oriented report serialization; `parse_reduction_report` inverts it.
pub fn write_reduction_report(report: &ReductionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "delta: {}", report.delta);
    let _ = writeln!(
        out,
        "epsilon: {}/{}",
        report.epsilon.numer(),
        report.epsilon.denom()
    );
    for it in &report.iterations {
        let ids: Vec<String> = it.removed.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "iteration: removed={} boundary-sum={} cut={} surplus={}",
            ids.join(","),
            it.boundary_sum,
            it.cut_edges,
            it.surplus
        );
    }
    for &v in &report.discrepancies {
        let _ = writeln!(out, "discrepancy: {v}");
    }
    match &report.outcome {
        ReductionOutcome::TypeA(a) => {
            let _ = writeln!(out, "outcome: early-exit");
            let _ = writeln!(out, "vertex: {}", a.vertex);
            let _ = writeln!(out, "square-degree: {}", a.square_degree);
        }
        ReductionOutcome::TypeB(core) => {
            let _ = writeln!(out, "outcome: core");
            for (i, &v) in core.branch_of.iter().enumerate() {
                let _ = writeln!(out, "h-vertex: {v} boundary={}", core.boundary_degree[i]);
            }
            for (e, &r) in core.core_of.iter().enumerate() {
                let (hu, hv) = core.h.endpoints(e);
                let _ = writeln!(out, "h-edge: {hu} {hv} core={r}");
            }
        }
        ReductionOutcome::NoReduction => {
            let _ = writeln!(out, "outcome: none");
        }
    }
    out
}

pub fn parse_reduction_report(text: &str) -> Result<ReductionReport, ReductionError> {
    let bad = |msg: &str| ReductionError::BadReport(msg.to_string());
    let mut delta = None;
    let mut epsilon = None;
    let mut outcome_kind = None;
    let mut vertex = None;
    let mut square_degree = None;
    let mut branch: Vec<(VertexId, u64)> = Vec::new();
    let mut h_edges: Vec<(usize, usize, VertexId)> = Vec::new();
    let mut iterations = Vec::new();
    let mut discrepancies = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| bad(&format!("missing ':' in {line:?}")))?;
        let rest = rest.trim();
        match key.trim() {
            "delta" => delta = Some(rest.parse().map_err(|_| bad("bad delta"))?),
            "epsilon" => {
                let (num, den) = rest.split_once('/').ok_or_else(|| bad("bad epsilon"))?;
                let num: i64 = num.parse().map_err(|_| bad("bad epsilon"))?;
                let den: i64 = den.parse().map_err(|_| bad("bad epsilon"))?;
                if den == 0 {
                    return Err(bad("bad epsilon"));
                }
                epsilon = Some(Rational64::new(num, den));
            }
            "outcome" => outcome_kind = Some(rest.to_string()),
            "vertex" => vertex = Some(rest.parse().map_err(|_| bad("bad vertex"))?),
            "square-degree" => {
                square_degree = Some(rest.parse().map_err(|_| bad("bad square-degree"))?)
            }
            "h-vertex" => {
                let (v, b) = rest
                    .split_once(" boundary=")
                    .ok_or_else(|| bad("bad h-vertex"))?;
                branch.push((
                    v.trim().parse().map_err(|_| bad("bad h-vertex"))?,
                    b.trim().parse().map_err(|_| bad("bad h-vertex"))?,
                ));
            }
            "h-edge" => {
                let (pair, core) = rest.split_once(" core=").ok_or_else(|| bad("bad h-edge"))?;
                let mut ends = pair.split_whitespace();
                let hu = ends
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad h-edge"))?;
                let hv = ends
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad h-edge"))?;
                if ends.next().is_some() {
                    return Err(bad("bad h-edge"));
                }
                h_edges.push((hu, hv, core.trim().parse().map_err(|_| bad("bad h-edge"))?));
            }
            "iteration" => {
                let mut removed = None;
                let mut boundary_sum = None;
                let mut cut = None;
                let mut surplus = None;
                for tok in rest.split_whitespace() {
                    let (k, v) = tok.split_once('=').ok_or_else(|| bad("bad iteration"))?;
                    match k {
                        "removed" => {
                            removed = Some(
                                v.split(',')
                                    .map(|s| s.parse::<usize>())
                                    .collect::<Result<Vec<_>, _>>()
                                    .map_err(|_| bad("bad iteration"))?,
                            )
                        }
                        "boundary-sum" => {
                            boundary_sum = Some(v.parse().map_err(|_| bad("bad iteration"))?)
                        }
                        "cut" => cut = Some(v.parse().map_err(|_| bad("bad iteration"))?),
                        "surplus" => surplus = Some(v.parse().map_err(|_| bad("bad iteration"))?),
                        _ => return Err(bad("bad iteration")),
                    }
                }
                iterations.push(IterationRecord {
                    removed: removed.ok_or_else(|| bad("bad iteration"))?,
                    boundary_sum: boundary_sum.ok_or_else(|| bad("bad iteration"))?,
                    cut_edges: cut.ok_or_else(|| bad("bad iteration"))?,
                    surplus: surplus.ok_or_else(|| bad("bad iteration"))?,
                });
            }
            "discrepancy" => discrepancies.push(rest.parse().map_err(|_| bad("bad discrepancy"))?),
            other => return Err(bad(&format!("unknown key {other:?}"))),
        }
    }
    let outcome = match outcome_kind.as_deref() {
        Some("early-exit") => ReductionOutcome::TypeA(TypeACertificate {
            vertex: vertex.ok_or_else(|| bad("missing vertex"))?,
            square_degree: square_degree.ok_or_else(|| bad("missing square-degree"))?,
        }),
        Some("core") => {
            let mut h = MultiGraph::with_vertices(branch.len());
            let mut core_of = Vec::new();
            for (hu, hv, r) in h_edges {
                if hu >= branch.len() || hv >= branch.len() {
                    return Err(bad("h-edge endpoint out of range"));
                }
                h.add_edge(hu, hv).map_err(|_| bad("loop in h-edge"))?;
                core_of.push(r);
            }
            ReductionOutcome::TypeB(CoreInstance {
                h,
                branch_of: branch.iter().map(|&(v, _)| v).collect(),
                core_of,
                boundary_degree: branch.iter().map(|&(_, b)| b).collect(),
            })
        }
        Some("none") => ReductionOutcome::NoReduction,
        Some(other) => return Err(bad(&format!("unknown outcome {other:?}"))),
        None => return Err(bad("missing outcome")),
    };
    Ok(ReductionReport {
        delta: delta.ok_or_else(|| bad("missing delta"))?,
        epsilon: epsilon.ok_or_else(|| bad("missing epsilon"))?,
        outcome,
        iterations,
        discrepancies,
    })
}
