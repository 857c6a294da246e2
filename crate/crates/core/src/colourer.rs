//! Randomised list-edge-colouring of multigraphs by per-colour hard-core
//! matching sampling, with two conflict layers on top of properness: J1
//! pairs must get distinct colours, J2 pairs must get colours at least `s`
//! apart.  A bounded-resampling loop replaces the existential local-lemma
//! argument; a greedy pass and an exact backtracking fallback finish
//! whatever the iterations leave behind.  The module also hosts the
//! machinery for extending a partial square colouring over a reduction
//! core, including the two-copies construction for vertices short of the
//! degree parameter.

use crate::exact::{exact_list_colouring, ExactConfig, ExactError, ExactOutcome};
use crate::graph::{EdgeId, MultiGraph, VertexId};
use crate::io::ListAssignment;
use crate::matching::{
    fit_activities, partition_and_marginals, FitError, HardCoreModel, MatchingError, ZCache,
};
use crate::reduction::{verify_core_instance, CoreInstance, CoreViolation, ReductionParams};
use num_rational::Rational64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub type Colour = i64;

#[derive(Debug, thiserror::Error)]
pub enum ColourError {
    #[error("expected {expected} edge lists, got {got}")]
    ListMismatch { expected: usize, got: usize },
    #[error("epsilon must lie in (0, 1]")]
    BadEpsilon,
    #[error("conflict graphs cover {got} edges, instance has {expected}")]
    ConflictMismatch { expected: usize, got: usize },
    #[error("matching engine: {0}")]
    Matching(#[from] MatchingError),
    #[error("exact fallback: {0}")]
    Fallback(#[from] ExactError),
    #[error("core certificate: {0}")]
    Certificate(#[from] CoreViolation),
    #[error("vertex {0} has degree above the delta parameter")]
    DegreeAboveDelta(VertexId),
    #[error("partial colouring misses vertex {0}")]
    PartialMissing(VertexId),
    #[error("partial colouring covers core vertex {0}")]
    PartialCoversCore(VertexId),
    #[error("partial colouring is improper: vertices {0} and {1} share a colour")]
    PartialImproper(VertexId, VertexId),
}

/// Tuning knobs for the iterative colourer.  `delta_factor` (δ), `xi` (ξ),
/// `k_const` (K), `c_const` (C) and `t_dist` (t) parameterize the
/// bad-event thresholds and the dependency diagnostic; `loosen` relaxes
/// the thresholds, which are unattainable at small degree parameters.
#[derive(Debug, Clone)]
pub struct ColourerParams {
    pub epsilon: Rational64,
    pub delta_factor: f64,
    pub xi: f64,
    pub k_const: f64,
    pub c_const: f64,
    pub t_dist: u32,
    pub loosen: f64,
    pub retry_limit: u32,
    pub uniform_resolution: bool,
    pub max_iterations: u32,
    pub stall_limit: u32,
    pub fit_max_iter: usize,
}

impl ColourerParams {
    pub fn new(epsilon: Rational64) -> Result<Self, ColourError> {
        if !(epsilon > Rational64::zero() && epsilon <= Rational64::from_integer(1)) {
            return Err(ColourError::BadEpsilon);
        }
        let eps = *epsilon.numer() as f64 / *epsilon.denom() as f64;
        let delta_factor = 1.0 - 1.0 / (1.0 + eps / 2.0);
        let k_const = 6.0;
        let t_dist = (8.0 * (k_const + 1.0) * (k_const + 1.0) / eps + 2.0).ceil() as u32;
        Ok(ColourerParams {
            epsilon,
            delta_factor,
            xi: delta_factor / 2.0,
            k_const,
            c_const: 3.0,
            t_dist,
            loosen: 4.0,
            retry_limit: 20,
            uniform_resolution: false,
            max_iterations: 40,
            stall_limit: 3,
            fit_max_iter: 2_000,
        })
    }
}

/// Conflict layers over the edge set: J1 adjacency forbids equal colours,
/// J2 adjacency demands a gap of at least `s`.
#[derive(Debug, Clone)]
pub struct ConflictGraphs {
    j1: Vec<Vec<EdgeId>>,
    j2: Vec<Vec<EdgeId>>,
    pub s: Colour,
}

impl ConflictGraphs {
    pub fn empty(edges: usize, s: Colour) -> Self {
        ConflictGraphs {
            j1: vec![Vec::new(); edges],
            j2: vec![Vec::new(); edges],
            s,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.j1.len()
    }

    pub fn add_j1(&mut self, e: EdgeId, f: EdgeId) {
        self.j1[e].push(f);
        self.j1[f].push(e);
    }

    pub fn add_j2(&mut self, e: EdgeId, f: EdgeId) {
        self.j2[e].push(f);
        self.j2[f].push(e);
    }

    pub fn j1_neighbours(&self, e: EdgeId) -> &[EdgeId] {
        &self.j1[e]
    }

    pub fn j2_neighbours(&self, e: EdgeId) -> &[EdgeId] {
        &self.j2[e]
    }

    pub fn max_degrees(&self) -> (usize, usize) {
        (
            self.j1.iter().map(Vec::len).max().unwrap_or(0),
            self.j2.iter().map(Vec::len).max().unwrap_or(0),
        )
    }
}

/// The uncoloured remainder and everything needed to rebuild the
/// per-colour graphs: assignments, per-colour vertex cover from chosen
/// matchings, and the per-edge forbidden colours accumulated from
/// coloured conflict neighbours (exact colours from J1, gap bands from
/// J2, kept as merged inclusive ranges).
#[derive(Debug, Clone)]
pub struct ColourState {
    h: MultiGraph,
    lists: Vec<Vec<Colour>>,
    assigned: Vec<Option<Colour>>,
    covered: BTreeMap<Colour, Vec<bool>>,
    forbidden_exact: Vec<BTreeSet<Colour>>,
    forbidden_ranges: Vec<Vec<(Colour, Colour)>>,
    iteration: u32,
}

fn add_range(ranges: &mut Vec<(Colour, Colour)>, lo: Colour, hi: Colour) {
    ranges.push((lo, hi));
    ranges.sort_unstable();
    let mut merged: Vec<(Colour, Colour)> = Vec::with_capacity(ranges.len());
    for &(a, b) in ranges.iter() {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    *ranges = merged;
}

impl ColourState {
    pub fn new(h: MultiGraph, lists: Vec<Vec<Colour>>) -> Result<Self, ColourError> {
        let m = h.edge_count();
        if lists.len() != m {
            return Err(ColourError::ListMismatch {
                expected: m,
                got: lists.len(),
            });
        }
        let lists = lists
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        Ok(ColourState {
            h,
            lists,
            assigned: vec![None; m],
            covered: BTreeMap::new(),
            forbidden_exact: vec![BTreeSet::new(); m],
            forbidden_ranges: vec![Vec::new(); m],
            iteration: 0,
        })
    }

    pub fn graph(&self) -> &MultiGraph {
        &self.h
    }

    pub fn lists(&self) -> &[Vec<Colour>] {
        &self.lists
    }

    pub fn assigned(&self) -> &[Option<Colour>] {
        &self.assigned
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn uncoloured(&self) -> Vec<EdgeId> {
        (0..self.h.edge_count())
            .filter(|&e| self.assigned[e].is_none())
            .collect()
    }

    fn is_forbidden(&self, e: EdgeId, colour: Colour) -> bool {
        self.forbidden_exact[e].contains(&colour)
            || self.forbidden_ranges[e]
                .iter()
                .any(|&(lo, hi)| lo <= colour && colour <= hi)
    }

    fn is_covered(&self, colour: Colour, v: VertexId) -> bool {
        self.covered.get(&colour).is_some_and(|c| c[v])
    }

    /// Colours of `L(e)` still usable for sampling: not forbidden by a
    /// coloured conflict neighbour, and with neither endpoint covered by an
    /// earlier chosen matching of that colour.
    pub fn residual_list(&self, e: EdgeId) -> Vec<Colour> {
        let (u, v) = self.h.endpoints(e);
        self.lists[e]
            .iter()
            .copied()
            .filter(|&c| {
                !self.is_forbidden(e, c) && !self.is_covered(c, u) && !self.is_covered(c, v)
            })
            .collect()
    }

    /// Edge set of the current per-colour graph: uncoloured edges whose
    /// residual list still holds `colour`.
    pub fn colour_edges(&self, colour: Colour) -> Vec<EdgeId> {
        let m = self.h.edge_count();
        (0..m)
            .filter(|&e| {
                self.assigned[e].is_none() && self.lists[e].binary_search(&colour).is_ok() && {
                    let (u, v) = self.h.endpoints(e);
                    !self.is_forbidden(e, colour)
                        && !self.is_covered(colour, u)
                        && !self.is_covered(colour, v)
                }
            })
            .collect()
    }

    fn cover(&mut self, colour: Colour, v: VertexId) {
        let n = self.h.vertex_count();
        self.covered.entry(colour).or_insert_with(|| vec![false; n])[v] = true;
    }
}

/// Dependency diagnostic for one iteration: the loosest observed bad-event
/// frequency against the theoretical dependency-count bound
/// `d = 2(Δ+1)Δ^{2t}`; the product `e·p̂·d` is recorded, not enforced (it
/// is astronomically large at desk scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLemmaDiagnostic {
    pub p_hat: f64,
    pub d_bound: f64,
    pub product: f64,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: u32,
    pub attempts: u32,
    pub coloured: usize,
    pub conflict_dropped: usize,
    /// Vertices whose residual degree exceeded the loosened degree-drop
    /// target.
    pub degree_events: Vec<VertexId>,
    /// Uncoloured edges whose residual marginal mass fell below the
    /// loosened threshold.
    pub mass_events: Vec<EdgeId>,
    /// Vertices with more same-iteration conflicts than the loosened
    /// conflict budget.
    pub conflict_events: Vec<VertexId>,
    pub degree_threshold: f64,
    pub mass_threshold: f64,
    pub conflict_threshold: f64,
    pub diagnostic: LocalLemmaDiagnostic,
    pub retry_exhausted: bool,
}

impl IterationReport {
    pub fn bad_event_count(&self) -> usize {
        self.degree_events.len() + self.mass_events.len() + self.conflict_events.len()
    }
}

#[derive(Debug)]
pub struct ColourOutcome {
    /// Per-edge colours when satisfiable, `None` when the exact fallback
    /// proved the instance uncolourable.
    pub assignment: Option<Vec<Colour>>,
    pub iterations: Vec<IterationReport>,
    pub fit_failures: Vec<Colour>,
    pub iteration_coloured: usize,
    pub greedy_coloured: usize,
    pub fallback_used: bool,
    pub fallback_edges: usize,
    pub retry_exhausted: bool,
    /// Independent re-check of the final assignment (always `false` for
    /// UNSAT).
    pub valid: bool,
}

fn sub_seed(master: u64, iteration: u32, attempt: u32, colour: Colour) -> u64 {
    let mut x = master
        ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ ((attempt as u64).wrapping_add(1)).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (colour as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Multigraph on the same vertex set carrying only `edges`; the returned
/// map sends new edge ids back to the originals.
fn edge_subgraph(h: &MultiGraph, edges: &[EdgeId]) -> (MultiGraph, Vec<EdgeId>) {
    let mut sub = MultiGraph::with_vertices(h.vertex_count());
    let mut back = Vec::with_capacity(edges.len());
    for &e in edges {
        let (u, v) = h.endpoints(e);
        sub.add_edge(u, v).expect("endpoints are in range");
        back.push(e);
    }
    (sub, back)
}

fn sample_from_cache(cache: &mut ZCache<f64>, m: usize, rng: &mut ChaCha8Rng) -> Vec<EdgeId> {
    let mut alive = cache.full_mask();
    let mut chosen = Vec::new();
    for e in 0..m {
        if alive & (1 << e) == 0 {
            continue;
        }
        let p = cache.marginal(e, alive);
        if rng.gen::<f64>() < p {
            chosen.push(e);
            alive &= !cache.conflict_mask(e);
        } else {
            alive &= !(1 << e);
        }
    }
    chosen
}

/// Exact sample from the hard-core distribution by sequential
/// self-reduction: edges are visited in id order and edge `e` is included
/// with the exact conditional probability
/// `λ(e)·Z(context − N[e])/Z(context)`.
pub fn sample_matching(model: &HardCoreModel<f64>, seed: u64) -> Vec<EdgeId> {
    let mut cache = ZCache::new(model.graph(), model.lambda()).expect("model already validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_from_cache(&mut cache, model.graph().edge_count(), &mut rng)
}

/// Give every edge appearing in at least one matching exactly one colour:
/// the smallest candidate by default, or a uniform choice when `uniform`.
pub fn resolve_multicoloured(
    matchings: &BTreeMap<Colour, Vec<EdgeId>>,
    uniform: bool,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<EdgeId, Colour> {
    let mut candidates: BTreeMap<EdgeId, Vec<Colour>> = BTreeMap::new();
    for (&colour, matching) in matchings {
        for &e in matching {
            candidates.entry(e).or_default().push(colour);
        }
    }
    candidates
        .into_iter()
        .map(|(e, colours)| {
            let colour = if uniform {
                colours[rng.gen_range(0..colours.len())]
            } else {
                colours[0]
            };
            (e, colour)
        })
        .collect()
}

/// First constraint violated by a complete assignment, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColourViolation {
    NotInList {
        e: EdgeId,
        colour: Colour,
    },
    Improper {
        e: EdgeId,
        f: EdgeId,
        colour: Colour,
    },
    J1Clash {
        e: EdgeId,
        f: EdgeId,
        colour: Colour,
    },
    J2Gap {
        e: EdgeId,
        f: EdgeId,
        gap: Colour,
    },
}

/// Re-check an assignment against the lists, properness on the line
/// graph, and both conflict layers, independently of how it was produced.
pub fn verify_edge_colouring(
    h: &MultiGraph,
    lists: &[Vec<Colour>],
    conflicts: &ConflictGraphs,
    assignment: &[Colour],
) -> Result<(), ColourViolation> {
    let m = h.edge_count();
    for e in 0..m {
        if !lists[e].contains(&assignment[e]) {
            return Err(ColourViolation::NotInList {
                e,
                colour: assignment[e],
            });
        }
    }
    for v in 0..h.vertex_count() {
        let inc = h.incident_edges(v);
        for (i, &e) in inc.iter().enumerate() {
            for &f in &inc[i + 1..] {
                if assignment[e] == assignment[f] {
                    return Err(ColourViolation::Improper {
                        e: e.min(f),
                        f: e.max(f),
                        colour: assignment[e],
                    });
                }
            }
        }
    }
    for e in 0..m {
        for &f in conflicts.j1_neighbours(e) {
            if f > e && assignment[e] == assignment[f] {
                return Err(ColourViolation::J1Clash {
                    e,
                    f,
                    colour: assignment[e],
                });
            }
        }
        for &f in conflicts.j2_neighbours(e) {
            let gap = (assignment[e] - assignment[f]).abs();
            if f > e && gap < conflicts.s {
                return Err(ColourViolation::J2Gap { e, f, gap });
            }
        }
    }
    Ok(())
}

/// The iterative colourer: owns the state, the per-colour activities
/// (fitted once at construction and carried forward), and the conflict
/// layers.
pub struct ColourEngine<'a> {
    state: ColourState,
    conflicts: &'a ConflictGraphs,
    params: &'a ColourerParams,
    delta_param: u64,
    master_seed: u64,
    lambda: BTreeMap<Colour, Vec<f64>>,
    pub fit_failures: Vec<Colour>,
}

impl<'a> ColourEngine<'a> {
    pub fn new(
        h: MultiGraph,
        lists: Vec<Vec<Colour>>,
        conflicts: &'a ConflictGraphs,
        params: &'a ColourerParams,
        delta_param: u64,
        master_seed: u64,
    ) -> Result<Self, ColourError> {
        let state = ColourState::new(h, lists)?;
        if conflicts.edge_count() != state.h.edge_count() {
            return Err(ColourError::ConflictMismatch {
                expected: state.h.edge_count(),
                got: conflicts.edge_count(),
            });
        }
        let mut engine = ColourEngine {
            state,
            conflicts,
            params,
            delta_param,
            master_seed,
            lambda: BTreeMap::new(),
            fit_failures: Vec::new(),
        };
        engine.fit_initial_activities()?;
        Ok(engine)
    }

    pub fn state(&self) -> &ColourState {
        &self.state
    }

    fn all_colours(&self) -> BTreeSet<Colour> {
        self.state.lists.iter().flatten().copied().collect()
    }

    /// Fit activities per colour on the iteration-0 graphs, targeting
    /// marginal `1/|L(e)|` per edge.  Non-convergent fits (boundary
    /// targets) keep their clipped final iterate and are recorded.
    fn fit_initial_activities(&mut self) -> Result<(), ColourError> {
        let m = self.state.h.edge_count();
        for colour in self.all_colours() {
            let edges = self.state.colour_edges(colour);
            if edges.is_empty() {
                continue;
            }
            let (sub, back) = edge_subgraph(&self.state.h, &edges);
            let target: Vec<f64> = back
                .iter()
                .map(|&e| 1.0 / self.state.lists[e].len() as f64)
                .collect();
            let fitted = match fit_activities(&sub, &target, 1e-10, self.params.fit_max_iter) {
                Ok(model) => model.lambda().to_vec(),
                Err(FitError::Invalid(err)) => return Err(err.into()),
                Err(FitError::NonConvergence(fail)) => {
                    self.fit_failures.push(colour);
                    fail.last_lambda
                        .iter()
                        .map(|&l| l.clamp(1e-9, 1e9))
                        .collect()
                }
            };
            let mut full = vec![0.0; m];
            for (i, &e) in back.iter().enumerate() {
                full[e] = fitted[i];
            }
            self.lambda.insert(colour, full);
        }
        Ok(())
    }

    fn sample_colour(
        &self,
        state: &ColourState,
        colour: Colour,
        seed: u64,
    ) -> Result<Vec<EdgeId>, ColourError> {
        let edges = state.colour_edges(colour);
        if edges.is_empty() {
            return Ok(Vec::new());
        }
        let lambda = match self.lambda.get(&colour) {
            Some(l) => l,
            None => return Ok(Vec::new()),
        };
        let (sub, back) = edge_subgraph(&state.h, &edges);
        let sub_lambda: Vec<f64> = back.iter().map(|&e| lambda[e]).collect();
        let mut cache = ZCache::new(&sub, &sub_lambda)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = sample_from_cache(&mut cache, edges.len(), &mut rng);
        Ok(sample.into_iter().map(|i| back[i]).collect())
    }

    /// Residual marginal mass `Σ_{γ∈L'(e)} x'_γ(e)` for every uncoloured
    /// edge, with the carried-forward activities restricted to the current
    /// per-colour graphs.
    fn residual_masses(&self, state: &ColourState) -> Result<Vec<f64>, ColourError> {
        let mut mass = vec![0.0; state.h.edge_count()];
        for (&colour, lambda) in &self.lambda {
            let edges = state.colour_edges(colour);
            if edges.is_empty() {
                continue;
            }
            let (sub, back) = edge_subgraph(&state.h, &edges);
            let sub_lambda: Vec<f64> = back.iter().map(|&e| lambda[e]).collect();
            let (_, marginals) = partition_and_marginals(&sub, &sub_lambda)?;
            for (i, &e) in back.iter().enumerate() {
                mass[e] += marginals[i];
            }
        }
        Ok(mass)
    }

    /// One whole iteration: sample every colour, resolve multicoloured
    /// edges, drop same-iteration conflict pairs, commit, and measure the
    /// bad events; resampled wholesale with fresh sub-seeds while any
    /// event fires and the retry budget lasts.
    pub fn iterate(&mut self) -> Result<IterationReport, ColourError> {
        let iteration = self.state.iteration;
        let delta = self.delta_param as f64;
        let degree_threshold =
            self.params.loosen * (1.0 + self.params.delta_factor) / (1.0 + self.params.xi) * delta
                / std::f64::consts::E;
        let mass_threshold = (-self.params.delta_factor).exp() / self.params.loosen;
        let conflict_threshold = self.params.loosen * delta.powf(0.8);

        let mut last_report = None;
        for attempt in 0..=self.params.retry_limit {
            let mut matchings: BTreeMap<Colour, Vec<EdgeId>> = BTreeMap::new();
            for colour in self.all_colours() {
                let seed = sub_seed(self.master_seed, iteration, attempt, colour);
                let matching = self.sample_colour(&self.state, colour, seed)?;
                if !matching.is_empty() {
                    matchings.insert(colour, matching);
                }
            }
            let mut resolve_rng = ChaCha8Rng::seed_from_u64(sub_seed(
                self.master_seed,
                iteration,
                attempt,
                Colour::MIN,
            ));
            let tentative =
                resolve_multicoloured(&matchings, self.params.uniform_resolution, &mut resolve_rng);

            // Same-iteration conflicts: both members go back in the pool.
            // Conflicts with earlier iterations cannot occur because the
            // forbidden sets already removed those colours from play.
            let mut dropped: BTreeSet<EdgeId> = BTreeSet::new();
            for (&e, &ce) in &tentative {
                for &f in self.conflicts.j1_neighbours(e) {
                    if let Some(&cf) = tentative.get(&f) {
                        if ce == cf {
                            dropped.insert(e);
                            dropped.insert(f);
                        }
                    }
                }
                for &f in self.conflicts.j2_neighbours(e) {
                    if let Some(&cf) = tentative.get(&f) {
                        if f != e && (ce - cf).abs() < self.conflicts.s {
                            dropped.insert(e);
                            dropped.insert(f);
                        }
                    }
                }
            }

            // Same-iteration conflict counts per vertex: an edge coloured
            // this round conflicts if some J-neighbour is in a chosen
            // matching of a clashing colour.
            let mut x_v = vec![0u64; self.state.h.vertex_count()];
            for (&e, &ce) in &tentative {
                let clash = self
                    .conflicts
                    .j1_neighbours(e)
                    .iter()
                    .any(|&f| matchings.get(&ce).is_some_and(|m| m.contains(&f)))
                    || self.conflicts.j2_neighbours(e).iter().any(|&f| {
                        matchings
                            .iter()
                            .any(|(&c, m)| (c - ce).abs() < self.conflicts.s && m.contains(&f))
                    });
                if clash {
                    let (u, v) = self.state.h.endpoints(e);
                    x_v[u] += 1;
                    x_v[v] += 1;
                }
            }

            let mut trial = self.state.clone();
            for (&colour, matching) in &matchings {
                for &e in matching {
                    let (u, v) = trial.h.endpoints(e);
                    trial.cover(colour, u);
                    trial.cover(colour, v);
                }
            }
            let mut coloured = 0usize;
            for (&e, &colour) in &tentative {
                if dropped.contains(&e) {
                    continue;
                }
                trial.assigned[e] = Some(colour);
                coloured += 1;
                for &f in self.conflicts.j1_neighbours(e) {
                    if trial.assigned[f].is_none() {
                        trial.forbidden_exact[f].insert(colour);
                    }
                }
                for &f in self.conflicts.j2_neighbours(e) {
                    if trial.assigned[f].is_none() {
                        add_range(
                            &mut trial.forbidden_ranges[f],
                            colour - (self.conflicts.s - 1),
                            colour + (self.conflicts.s - 1),
                        );
                    }
                }
            }
            trial.iteration += 1;

            let mut degree_events = Vec::new();
            for v in 0..trial.h.vertex_count() {
                let residual_degree = trial
                    .h
                    .incident_edges(v)
                    .iter()
                    .filter(|&&e| trial.assigned[e].is_none())
                    .count();
                if residual_degree as f64 > degree_threshold {
                    degree_events.push(v);
                }
            }
            let masses = self.residual_masses(&trial)?;
            let mut mass_events = Vec::new();
            for e in 0..trial.h.edge_count() {
                if trial.assigned[e].is_none() && masses[e] < mass_threshold {
                    mass_events.push(e);
                }
            }
            let conflict_events: Vec<VertexId> = (0..trial.h.vertex_count())
                .filter(|&v| x_v[v] as f64 > conflict_threshold)
                .collect();

            let events = degree_events.len() + mass_events.len() + conflict_events.len();
            let checked = 2 * trial.h.vertex_count() + trial.uncoloured().len();
            let p_hat = if checked == 0 {
                0.0
            } else {
                events as f64 / checked as f64
            };
            let d_bound = 2.0 * (delta + 1.0) * delta.powi(2 * self.params.t_dist as i32);
            let report = IterationReport {
                iteration,
                attempts: attempt + 1,
                coloured,
                conflict_dropped: dropped.len(),
                degree_events,
                mass_events,
                conflict_events,
                degree_threshold,
                mass_threshold,
                conflict_threshold,
                diagnostic: LocalLemmaDiagnostic {
                    p_hat,
                    d_bound,
                    product: std::f64::consts::E * p_hat * d_bound,
                },
                retry_exhausted: false,
            };
            if events == 0 {
                self.state = trial;
                return Ok(report);
            }
            last_report = Some((report, trial));
        }
        let (mut report, trial) = last_report.expect("at least one attempt ran");
        report.retry_exhausted = true;
        self.state = trial;
        Ok(report)
    }

    /// Iterate until everything is coloured, retries are exhausted, the
    /// iteration budget runs out, or no progress is made for
    /// `stall_limit` consecutive rounds.
    pub fn run(&mut self) -> Result<Vec<IterationReport>, ColourError> {
        let mut reports = Vec::new();
        let mut stalled = 0u32;
        while !self.state.uncoloured().is_empty()
            && (self.state.iteration) < self.params.max_iterations
        {
            let report = self.iterate()?;
            let exhausted = report.retry_exhausted;
            let progress = report.coloured > 0;
            reports.push(report);
            if exhausted {
                break;
            }
            stalled = if progress { 0 } else { stalled + 1 };
            if stalled >= self.params.stall_limit {
                break;
            }
        }
        Ok(reports)
    }

    fn feasible(&self, e: EdgeId, colour: Colour) -> bool {
        let (u, v) = self.state.h.endpoints(e);
        for &f in self
            .state
            .h
            .incident_edges(u)
            .iter()
            .chain(self.state.h.incident_edges(v))
        {
            if f != e && self.state.assigned[f] == Some(colour) {
                return false;
            }
        }
        for &f in self.conflicts.j1_neighbours(e) {
            if self.state.assigned[f] == Some(colour) {
                return false;
            }
        }
        for &f in self.conflicts.j2_neighbours(e) {
            if let Some(cf) = self.state.assigned[f] {
                if (cf - colour).abs() < self.conflicts.s {
                    return false;
                }
            }
        }
        true
    }

    /// Complete the assignment: greedily give each uncoloured edge the
    /// smallest colour of its list compatible with the actual constraints,
    /// and on any dead end (or when `force_exact` is set) hand the whole
    /// uncoloured remainder to the exact backtracking solver.  UNSAT can
    /// only come from the exact route.
    pub fn finish(&mut self, force_exact: bool) -> Result<FinishReport, ColourError> {
        let mut report = FinishReport {
            greedy_coloured: 0,
            fallback_used: false,
            fallback_edges: 0,
            unsat: false,
        };
        if !force_exact {
            let snapshot = self.state.assigned.clone();
            let mut stuck = false;
            for e in self.state.uncoloured() {
                let choice = self.state.lists[e]
                    .iter()
                    .copied()
                    .find(|&c| self.feasible(e, c));
                match choice {
                    Some(c) => {
                        self.state.assigned[e] = Some(c);
                        report.greedy_coloured += 1;
                    }
                    None => {
                        stuck = true;
                        break;
                    }
                }
            }
            if !stuck {
                return Ok(report);
            }
            self.state.assigned = snapshot;
            report.greedy_coloured = 0;
        }
        let uncol = self.state.uncoloured();
        report.fallback_used = true;
        report.fallback_edges = uncol.len();
        if uncol.is_empty() {
            return Ok(report);
        }
        let index_of: BTreeMap<EdgeId, usize> =
            uncol.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut target = MultiGraph::with_vertices(uncol.len());
        let mut separation = MultiGraph::with_vertices(uncol.len());
        let mut target_pairs = BTreeSet::new();
        let mut separation_pairs = BTreeSet::new();
        for (i, &e) in uncol.iter().enumerate() {
            let (u, v) = self.state.h.endpoints(e);
            for &f in self
                .state
                .h
                .incident_edges(u)
                .iter()
                .chain(self.state.h.incident_edges(v))
                .chain(self.conflicts.j1_neighbours(e))
            {
                if let Some(&j) = index_of.get(&f) {
                    if j != i {
                        target_pairs.insert((i.min(j), i.max(j)));
                    }
                }
            }
            for &f in self.conflicts.j2_neighbours(e) {
                if let Some(&j) = index_of.get(&f) {
                    separation_pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
        for (i, j) in target_pairs {
            target.add_edge(i, j).expect("indices in range");
        }
        for (i, j) in separation_pairs {
            separation.add_edge(i, j).expect("indices in range");
        }
        let mut lists = ListAssignment::new();
        for (i, &e) in uncol.iter().enumerate() {
            let feasible: Vec<i64> = self.state.lists[e]
                .iter()
                .copied()
                .filter(|&c| self.feasible(e, c))
                .collect();
            lists.insert(i, feasible);
        }
        let outcome = exact_list_colouring(
            &target,
            &lists,
            Some((&separation, self.conflicts.s)),
            &ExactConfig::default(),
        )?;
        match outcome {
            ExactOutcome::Sat(labelling) => {
                for (i, &e) in uncol.iter().enumerate() {
                    self.state.assigned[e] = Some(labelling.labels[i]);
                }
            }
            ExactOutcome::Unsat => report.unsat = true,
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FinishReport {
    pub greedy_coloured: usize,
    pub fallback_used: bool,
    pub fallback_edges: usize,
    pub unsat: bool,
}

/// Colour the edges of `h` from per-edge lists under the conflict layers:
/// sampling iterations, then the greedy/exact finish, then an independent
/// validity re-check.
pub fn colour_edges(
    h: MultiGraph,
    lists: Vec<Vec<Colour>>,
    conflicts: &ConflictGraphs,
    params: &ColourerParams,
    delta_param: u64,
    seed: u64,
) -> Result<ColourOutcome, ColourError> {
    let mut engine = ColourEngine::new(h, lists, conflicts, params, delta_param, seed)?;
    let iterations = engine.run()?;
    let retry_exhausted = iterations.iter().any(|r| r.retry_exhausted);
    let iteration_coloured = engine.state.assigned.iter().filter(|a| a.is_some()).count();
    let finish = engine.finish(retry_exhausted)?;
    let fit_failures = engine.fit_failures.clone();
    if finish.unsat {
        return Ok(ColourOutcome {
            assignment: None,
            iterations,
            fit_failures,
            iteration_coloured,
            greedy_coloured: finish.greedy_coloured,
            fallback_used: finish.fallback_used,
            fallback_edges: finish.fallback_edges,
            retry_exhausted,
            valid: false,
        });
    }
    let assignment: Vec<Colour> = engine
        .state
        .assigned
        .iter()
        .map(|a| a.expect("finish colours everything on SAT"))
        .collect();
    let valid = verify_edge_colouring(
        engine.state.graph(),
        engine.state.lists(),
        conflicts,
        &assignment,
    )
    .is_ok();
    Ok(ColourOutcome {
        assignment: Some(assignment),
        iterations,
        fit_failures,
        iteration_coloured,
        greedy_coloured: finish.greedy_coloured,
        fallback_used: finish.fallback_used,
        fallback_edges: finish.fallback_edges,
        retry_exhausted,
        valid,
    })
}

// ---------------------------------------------------------------------------
// Core extension: from a reduction certificate and a partial square
// colouring to colours for the removed core vertices.
// ---------------------------------------------------------------------------

/// Conflict layers induced by a core certificate: cores adjacent in `g`
/// need a colour gap (J2); cores at distance two that are not already
/// forced apart by properness of the line-graph colouring need distinct
/// colours (J1).
pub fn build_conflict_graphs(g: &MultiGraph, core: &CoreInstance, s: Colour) -> ConflictGraphs {
    let m = core.h.edge_count();
    let mut conflicts = ConflictGraphs::empty(m, s);
    let dist: Vec<Vec<Option<u32>>> = (0..m)
        .map(|e| g.bfs_distances(core.core_of[e], Some(2)))
        .collect();
    for e in 0..m {
        for f in e + 1..m {
            if g.has_edge(core.core_of[e], core.core_of[f]) {
                conflicts.add_j2(e, f);
                continue;
            }
            let (eu, ev) = core.h.endpoints(e);
            let (fu, fv) = core.h.endpoints(f);
            let h_adjacent = eu == fu || eu == fv || ev == fu || ev == fv;
            if h_adjacent {
                continue;
            }
            if dist[e][core.core_of[f]].is_some_and(|d| d <= 2) {
                conflicts.add_j1(e, f);
            }
        }
    }
    conflicts
}

/// Largest integer `n` with `n ≥ q − 3√delta`, i.e. `⌈q − 3√delta⌉`,
/// computed without floating point (square roots enter only through
/// squared comparisons).
fn ceil_minus_three_sqrt(q: Rational64, delta: u64) -> i64 {
    let mut n = q.ceil().to_integer();
    // Decrease while n−1 still satisfies n−1 ≥ q − 3√delta.
    loop {
        let gap = q - Rational64::from_integer(n - 1);
        let fits =
            gap <= Rational64::zero() || gap * gap <= Rational64::from_integer(9 * delta as i64);
        if fits {
            n -= 1;
        } else {
            break;
        }
    }
    n
}

/// Per-core-edge residual lists: the nominal target drawn from the
/// palette after removing colours seen on distance-≤2 neighbours outside
/// the core set and whole gap-bands around colours of direct neighbours
/// outside it.  At small degree parameters the nominal size collapses,
/// so it is floored at the greedy bound (adjacent edges plus conflict
/// neighbours plus one), below which no list contents are safe; floored
/// edges are recorded.  Oversized pools are trimmed to the target with a
/// rotating offset so parallel edges end up with staggered lists;
/// undersized pools are kept whole and recorded as shortfalls.
#[derive(Debug, Clone)]
pub struct CoreListPlan {
    pub lists: Vec<Vec<Colour>>,
    pub targets: Vec<usize>,
    pub loosened: Vec<EdgeId>,
    pub shortfalls: Vec<EdgeId>,
    pub palette: Colour,
}

pub fn residual_core_lists(
    g: &MultiGraph,
    core: &CoreInstance,
    partial: &BTreeMap<VertexId, Colour>,
    conflicts: &ConflictGraphs,
    params: &ReductionParams,
) -> Result<CoreListPlan, ColourError> {
    let in_core: BTreeSet<VertexId> = core.core_of.iter().copied().collect();
    let s = params.t_light() as Colour;
    let three_half_plus_eps =
        (Rational64::new(3, 2) + params.epsilon) * Rational64::from_integer(params.delta as i64);
    let palette = three_half_plus_eps.ceil().to_integer();
    let m = core.h.edge_count();
    let mut lists = Vec::with_capacity(m);
    let mut targets = Vec::with_capacity(m);
    let mut loosened = Vec::new();
    let mut shortfalls = Vec::new();
    for e in 0..m {
        let r = core.core_of[e];
        let (hv, hw) = core.h.endpoints(e);
        let slack_v = g.degree(core.branch_of[hv]) as i64 - core.h.degree(hv) as i64;
        let slack_w = g.degree(core.branch_of[hw]) as i64 - core.h.degree(hw) as i64;
        let q = three_half_plus_eps
            - Rational64::from_integer(slack_v)
            - Rational64::from_integer(slack_w);
        let paper_target = ceil_minus_three_sqrt(q, params.delta);
        let greedy_floor = (core.h.degree(hv) as i64 - 1)
            + (core.h.degree(hw) as i64 - 1)
            + conflicts.j1_neighbours(e).len() as i64
            + (2 * s - 1) * conflicts.j2_neighbours(e).len() as i64
            + 1;
        let target = paper_target.max(greedy_floor) as usize;
        if paper_target < greedy_floor {
            loosened.push(e);
        }
        let mut banned: BTreeSet<Colour> = BTreeSet::new();
        let mut bands: Vec<(Colour, Colour)> = Vec::new();
        let dist = g.bfs_distances(r, Some(2));
        for u in 0..g.vertex_count() {
            if u == r || in_core.contains(&u) {
                continue;
            }
            if dist[u].is_some_and(|d| d <= 2) {
                let c = *partial.get(&u).ok_or(ColourError::PartialMissing(u))?;
                banned.insert(c);
            }
        }
        for u in g.distinct_neighbours(r) {
            if !in_core.contains(&u) {
                let c = *partial.get(&u).ok_or(ColourError::PartialMissing(u))?;
                bands.push((c - (s - 1), c + (s - 1)));
            }
        }
        let pool: Vec<Colour> = (0..palette)
            .filter(|c| !banned.contains(c) && !bands.iter().any(|&(lo, hi)| lo <= *c && *c <= hi))
            .collect();
        if pool.len() <= target {
            if pool.len() < target {
                shortfalls.push(e);
            }
            lists.push(pool);
        } else {
            let offset = e % pool.len();
            lists.push(
                (0..target)
                    .map(|i| pool[(offset + i) % pool.len()])
                    .collect(),
            );
        }
        targets.push(target);
    }
    Ok(CoreListPlan {
        lists,
        targets,
        loosened,
        shortfalls,
        palette,
    })
}

/// The doubled multigraph: two copies of `h` plus, for each vertex with a
/// positive deficit, that many parallel edges between its copies.  Copy
/// edges keep identical lists; bundle edges get shared fresh-palette
/// lists, so they can never collide with real colours.
#[derive(Debug)]
pub struct DoubledInstance {
    pub h: MultiGraph,
    pub lists: Vec<Vec<Colour>>,
    pub conflicts: ConflictGraphs,
    /// Edge ids below this belong to copy 1; the next block of the same
    /// size is copy 2; bundle edges follow.
    pub base_edges: usize,
    pub bundles: Vec<(VertexId, usize)>,
    pub bundle_loosened: Vec<VertexId>,
}

pub fn build_doubled(
    h: &MultiGraph,
    lists: &[Vec<Colour>],
    conflicts: &ConflictGraphs,
    deficits: &[usize],
    bundle_sizes: &[usize],
    bundle_loosened: Vec<VertexId>,
    fresh_base: Colour,
) -> DoubledInstance {
    let n = h.vertex_count();
    let m = h.edge_count();
    let mut doubled = MultiGraph::with_vertices(2 * n);
    let mut new_lists: Vec<Vec<Colour>> = Vec::new();
    for copy in 0..2 {
        for e in 0..m {
            let (u, v) = h.endpoints(e);
            doubled
                .add_edge(u + copy * n, v + copy * n)
                .expect("in range");
            new_lists.push(lists[e].clone());
        }
    }
    let mut bundles = Vec::new();
    for v in 0..n {
        if deficits[v] == 0 {
            continue;
        }
        let bundle_list: Vec<Colour> = (0..bundle_sizes[v] as Colour)
            .map(|i| fresh_base + i)
            .collect();
        for _ in 0..deficits[v] {
            doubled.add_edge(v, v + n).expect("in range");
            new_lists.push(bundle_list.clone());
        }
        bundles.push((v, deficits[v]));
    }
    let mut new_conflicts = ConflictGraphs::empty(doubled.edge_count(), conflicts.s);
    for e in 0..m {
        for &f in conflicts.j1_neighbours(e) {
            if f > e {
                new_conflicts.add_j1(e, f);
                new_conflicts.add_j1(e + m, f + m);
            }
        }
        for &f in conflicts.j2_neighbours(e) {
            if f > e {
                new_conflicts.add_j2(e, f);
                new_conflicts.add_j2(e + m, f + m);
            }
        }
    }
    DoubledInstance {
        h: doubled,
        lists: new_lists,
        conflicts: new_conflicts,
        base_edges: m,
        bundles,
        bundle_loosened,
    }
}

/// First square-properness or gap failure involving a core vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtensionViolation {
    pub u: VertexId,
    pub v: VertexId,
    pub distance: u32,
    pub gap: i64,
    pub required: i64,
}

#[derive(Debug)]
pub struct ExtensionOutcome {
    pub doubled: bool,
    pub separation: Colour,
    pub palette: Colour,
    pub list_targets: Vec<usize>,
    pub list_loosened: Vec<EdgeId>,
    pub list_shortfalls: Vec<EdgeId>,
    pub bundle_loosened: Vec<VertexId>,
    pub colouring: ColourOutcome,
    /// Core-vertex colours, present exactly when the inner colouring is
    /// SAT.
    pub core_colours: Option<BTreeMap<VertexId, Colour>>,
    pub verified: bool,
    pub violation: Option<ExtensionViolation>,
}

/// Check the combined colouring on every pair at distance ≤ 2 with at
/// least one end in the core set: distinct colours always, gap ≥ s at
/// distance 1.
fn verify_extension(
    g: &MultiGraph,
    in_core: &BTreeSet<VertexId>,
    full: &BTreeMap<VertexId, Colour>,
    s: Colour,
) -> Option<ExtensionViolation> {
    for &u in in_core {
        let (d1, d2) = g.dist1_dist2(u);
        for (distance, required, others) in [(1u32, s, &d1), (2, 1, &d2)] {
            for &v in others {
                let gap = (full[&u] - full[&v]).abs();
                if gap < required {
                    return Some(ExtensionViolation {
                        u,
                        v,
                        distance,
                        gap,
                        required,
                    });
                }
            }
        }
    }
    None
}

/// Extend a proper colouring of the square of `g` minus the core set to
/// the cores.  The certificate is re-verified, the conflict layers and
/// residual lists are built from the partial colouring, the doubled
/// instance is used when any branch vertex falls short of the degree
/// parameter, and the final combined colouring is independently
/// re-checked.
pub fn colour_core_extension(
    g: &MultiGraph,
    core: &CoreInstance,
    partial: &BTreeMap<VertexId, Colour>,
    params: &ReductionParams,
    colour_params: &ColourerParams,
    seed: u64,
) -> Result<ExtensionOutcome, ColourError> {
    verify_core_instance(g, params, core)?;
    for v in 0..g.vertex_count() {
        if g.degree(v) as u64 > params.delta {
            return Err(ColourError::DegreeAboveDelta(v));
        }
    }
    let in_core: BTreeSet<VertexId> = core.core_of.iter().copied().collect();
    for v in 0..g.vertex_count() {
        if in_core.contains(&v) {
            if partial.contains_key(&v) {
                return Err(ColourError::PartialCoversCore(v));
            }
        } else if !partial.contains_key(&v) {
            return Err(ColourError::PartialMissing(v));
        }
    }
    let sq = g.square();
    for &(u, v) in sq.edges() {
        if !in_core.contains(&u) && !in_core.contains(&v) && partial[&u] == partial[&v] {
            return Err(ColourError::PartialImproper(u, v));
        }
    }

    let s = params.t_light() as Colour;
    let conflicts = build_conflict_graphs(g, core, s);
    let plan = residual_core_lists(g, core, partial, &conflicts, params)?;
    let deficits: Vec<usize> = core
        .branch_of
        .iter()
        .map(|&b| (params.delta - g.degree(b) as u64) as usize)
        .collect();
    let doubled = deficits.iter().any(|&d| d > 0);

    let (colouring, copy_assignment) = if doubled {
        let mut bundle_sizes = vec![0usize; core.h.vertex_count()];
        let mut bundle_loosened = Vec::new();
        for v in 0..core.h.vertex_count() {
            if deficits[v] == 0 {
                continue;
            }
            let slack = g.degree(core.branch_of[v]) as i64 - core.h.degree(v) as i64;
            let q = (Rational64::new(3, 2) + params.epsilon)
                * Rational64::from_integer(params.delta as i64)
                - Rational64::from_integer(2 * slack);
            let target = ceil_minus_three_sqrt(q, params.delta).max(1) as usize;
            let needed = deficits[v] + 1;
            bundle_sizes[v] = target.max(needed);
            if target < needed {
                bundle_loosened.push(v);
            }
        }
        let instance = build_doubled(
            &core.h,
            &plan.lists,
            &conflicts,
            &deficits,
            &bundle_sizes,
            bundle_loosened,
            plan.palette,
        );
        let outcome = colour_edges(
            instance.h,
            instance.lists,
            &instance.conflicts,
            colour_params,
            params.delta,
            seed,
        )?;
        let copy = outcome
            .assignment
            .as_ref()
            .map(|a| a[..instance.base_edges].to_vec());
        (
            ExtensionPieces {
                outcome,
                bundle_loosened: instance.bundles.iter().map(|&(v, _)| v).collect(),
            },
            copy,
        )
    } else {
        let outcome = colour_edges(
            core.h.clone(),
            plan.lists.clone(),
            &conflicts,
            colour_params,
            params.delta,
            seed,
        )?;
        let copy = outcome.assignment.clone();
        (
            ExtensionPieces {
                outcome,
                bundle_loosened: Vec::new(),
            },
            copy,
        )
    };

    let core_colours: Option<BTreeMap<VertexId, Colour>> = copy_assignment.map(|assignment| {
        assignment
            .iter()
            .enumerate()
            .map(|(e, &c)| (core.core_of[e], c))
            .collect()
    });
    let (verified, violation) = match &core_colours {
        Some(cores) => {
            let mut full = partial.clone();
            for (&v, &c) in cores {
                full.insert(v, c);
            }
            let violation = verify_extension(g, &in_core, &full, s);
            (violation.is_none(), violation)
        }
        None => (false, None),
    };
    Ok(ExtensionOutcome {
        doubled,
        separation: s,
        palette: plan.palette,
        list_targets: plan.targets,
        list_loosened: plan.loosened,
        list_shortfalls: plan.shortfalls,
        bundle_loosened: colouring.bundle_loosened,
        colouring: colouring.outcome,
        core_colours,
        verified,
        violation,
    })
}

struct ExtensionPieces {
    outcome: ColourOutcome,
    bundle_loosened: Vec<VertexId>,
}
