//! Exact list-colouring by backtracking.
//!
//! The engine answers SAT/UNSAT for: distinct values across the edges of a
//! target graph, plus an optional minimum gap `s` across the edges of a
//! second graph on the same vertices.  UNSAT answers come from exhausting
//! the search space, so they are definitive.  Instances are expected to stay
//! small (tens of vertices); a size cap guards against accidental blow-ups.

use thiserror::Error;

use crate::graph::{MultiGraph, VertexId};
use crate::io::ListAssignment;
use crate::labelling::{Labelling, LpqParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("instance has {got} vertices, cap is {cap}")]
    OverCap { got: usize, cap: usize },
    #[error("vertex {0} has no list")]
    MissingList(VertexId),
    #[error("separation graph has {got} vertices, target has {want}")]
    MismatchedSeparation { got: usize, want: usize },
    #[error("search aborted after {0} nodes")]
    NodeLimit(u64),
    #[error("clique hint contains a non-adjacent pair {0}, {1}")]
    BadClique(VertexId, VertexId),
    #[error("gaps must be at least 1, got p = {0}, q = {1}")]
    BadGap(i64, i64),
}

#[derive(Debug, Clone, Copy)]
pub struct ExactConfig {
    pub size_cap: usize,
    pub node_limit: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            size_cap: 64,
            node_limit: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactOutcome {
    Sat(Labelling),
    Unsat,
}

/// Constraint kinds folded into one adjacency structure.
#[derive(Clone, Copy)]
struct Constraint {
    other: VertexId,
    /// Required gap: 1 encodes plain distinctness.
    gap: i64,
}

struct Searcher {
    constraints: Vec<Vec<Constraint>>,
    /// Per vertex: candidate values plus a liveness count per value.
    values: Vec<Vec<i64>>,
    dead_count: Vec<Vec<u32>>,
    live: Vec<usize>,
    assigned: Vec<Option<i64>>,
    trail: Vec<(VertexId, usize)>,
    nodes: u64,
    node_limit: u64,
    /// Palette-symmetry mode: all lists equal one contiguous range and all
    /// constraints are distinctness, so values above the first unused
    /// palette entry never need trying.
    palette: Option<(i64, i64)>,
    fresh: i64,
}

impl Searcher {
    /// Kill `value_idx` of vertex `v` (reference counted: a value may be
    /// killed by several assigned neighbours).
    fn kill(&mut self, v: VertexId, idx: usize) -> bool {
        self.dead_count[v][idx] += 1;
        if self.dead_count[v][idx] == 1 {
            self.live[v] -= 1;
            self.trail.push((v, idx));
            if self.live[v] == 0 && self.assigned[v].is_none() {
                return false;
            }
        }
        true
    }

    fn unwind(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, idx) = self.trail.pop().unwrap();
            self.dead_count[v][idx] -= 1;
            if self.dead_count[v][idx] == 0 {
                self.live[v] += 1;
            }
        }
    }

    fn pick_vertex(&self) -> Option<VertexId> {
        let mut best: Option<(usize, VertexId)> = None;
        for v in 0..self.assigned.len() {
            if self.assigned[v].is_none() {
                let key = (self.live[v], v);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
        }
        best.map(|(_, v)| v)
    }

    fn solve(&mut self) -> Result<bool, ExactError> {
        let v = match self.pick_vertex() {
            None => return Ok(true),
            Some(v) => v,
        };
        self.nodes += 1;
        if self.nodes > self.node_limit {
            return Err(ExactError::NodeLimit(self.node_limit));
        }
        for idx in 0..self.values[v].len() {
            if self.dead_count[v][idx] > 0 {
                continue;
            }
            let value = self.values[v][idx];
            if self.palette.is_some() && value > self.fresh {
                // Larger palette values are interchangeable with `fresh`.
                break;
            }
            let mark = self.trail.len();
            let fresh_before = self.fresh;
            self.assigned[v] = Some(value);
            if value == self.fresh {
                self.fresh += 1;
            }
            let mut ok = true;
            'prop: for ci in 0..self.constraints[v].len() {
                let Constraint { other, gap } = self.constraints[v][ci];
                if self.assigned[other].is_some() {
                    continue;
                }
                for widx in 0..self.values[other].len() {
                    if self.dead_count[other][widx] == 0
                        && (self.values[other][widx] - value).abs() < gap
                        && !self.kill(other, widx)
                    {
                        ok = false;
                        break 'prop;
                    }
                }
            }
            if ok && self.solve()? {
                return Ok(true);
            }
            self.unwind(mark);
            self.assigned[v] = None;
            self.fresh = fresh_before;
        }
        Ok(false)
    }
}

/// Solve: distinct values across `target` edges, gap at least `s` across
/// `separation` edges, values drawn from per-vertex lists.
pub fn exact_list_colouring(
    target: &MultiGraph,
    lists: &ListAssignment,
    separation: Option<(&MultiGraph, i64)>,
    config: &ExactConfig,
) -> Result<ExactOutcome, ExactError> {
    exact_with_clique(target, lists, separation, None, config)
}

/// As [`exact_list_colouring`], with an optional pairwise-adjacent clique
/// whose vertices are pre-assigned first (a cheap, sound symmetry cut when
/// the palette is uniform).
pub fn exact_with_clique(
    target: &MultiGraph,
    lists: &ListAssignment,
    separation: Option<(&MultiGraph, i64)>,
    clique: Option<&[VertexId]>,
    config: &ExactConfig,
) -> Result<ExactOutcome, ExactError> {
    let layers: Vec<(&MultiGraph, i64)> = separation.into_iter().collect();
    exact_layered(target, lists, &layers, clique, config)
}

/// L(p,q) decision on the lists: gap ≥ p across edges of `g`, gap ≥ q
/// across pairs at distance exactly 2.  Distinctness within distance 2 is
/// always enforced, matching the labelling definition for p, q ≥ 1.
pub fn exact_lpq(
    g: &MultiGraph,
    lists: &ListAssignment,
    params: LpqParams,
    config: &ExactConfig,
) -> Result<ExactOutcome, ExactError> {
    if params.p < 1 || params.q < 1 {
        return Err(ExactError::BadGap(params.p, params.q));
    }
    let sq = g.square();
    let mut two_apart = MultiGraph::with_vertices(g.vertex_count());
    for &(u, v) in sq.edges() {
        if !g.has_edge(u, v) {
            two_apart.add_edge(u, v).unwrap();
        }
    }
    exact_layered(
        &sq,
        lists,
        &[(g, params.p), (&two_apart, params.q)],
        None,
        config,
    )
}

/// Common engine: pairs joined in `target` need distinct values; every
/// layer `(graph, s)` raises the required gap on its pairs to at least `s`,
/// with the largest requirement winning when a pair appears repeatedly.
fn exact_layered(
    target: &MultiGraph,
    lists: &ListAssignment,
    layers: &[(&MultiGraph, i64)],
    clique: Option<&[VertexId]>,
    config: &ExactConfig,
) -> Result<ExactOutcome, ExactError> {
    let n = target.vertex_count();
    if n > config.size_cap {
        return Err(ExactError::OverCap {
            got: n,
            cap: config.size_cap,
        });
    }
    for &(sep, _) in layers {
        if sep.vertex_count() != n {
            return Err(ExactError::MismatchedSeparation {
                got: sep.vertex_count(),
                want: n,
            });
        }
    }
    let mut values = Vec::with_capacity(n);
    for v in 0..n {
        let list = lists.get(v).ok_or(ExactError::MissingList(v))?;
        if list.is_empty() {
            return Ok(ExactOutcome::Unsat);
        }
        values.push(list.to_vec());
    }

    // Merge both graphs into per-vertex constraint lists, keeping the larger
    // gap when a pair appears in both.
    let mut constraints: Vec<Vec<Constraint>> = vec![Vec::new(); n];
    {
        let mut gap_of = std::collections::BTreeMap::new();
        for &(u, v) in target.edges() {
            let key = (u.min(v), u.max(v));
            let e = gap_of.entry(key).or_insert(1i64);
            *e = (*e).max(1);
        }
        for &(sep, s) in layers {
            for &(u, v) in sep.edges() {
                let key = (u.min(v), u.max(v));
                let e = gap_of.entry(key).or_insert(s);
                *e = (*e).max(s);
            }
        }
        for ((u, v), gap) in gap_of {
            constraints[u].push(Constraint { other: v, gap });
            constraints[v].push(Constraint { other: u, gap });
        }
    }

    // Palette symmetry applies when every list is the same contiguous run
    // and every constraint is distinctness.
    let palette = {
        let first = &values[0];
        let contiguous = first.windows(2).all(|w| w[1] == w[0] + 1);
        let uniform = values.iter().all(|l| l == first);
        let plain = constraints.iter().all(|cs| cs.iter().all(|c| c.gap == 1));
        if contiguous && uniform && plain {
            Some((first[0], *first.last().unwrap()))
        } else {
            None
        }
    };

    let mut searcher = Searcher {
        dead_count: values.iter().map(|l| vec![0; l.len()]).collect(),
        live: values.iter().map(|l| l.len()).collect(),
        assigned: vec![None; n],
        trail: Vec::new(),
        nodes: 0,
        node_limit: config.node_limit,
        fresh: palette.map_or(i64::MIN, |(lo, _)| lo),
        palette,
        constraints,
        values,
    };

    // Pre-assign the clique: pairwise-adjacent vertices must take pairwise
    // incompatible values, so fixing them costs no completeness under the
    // palette symmetry (and is simply a value choice otherwise).
    if let Some(q) = clique {
        for (i, &u) in q.iter().enumerate() {
            for &v in &q[i + 1..] {
                if !target.has_edge(u, v) {
                    return Err(ExactError::BadClique(u, v));
                }
            }
        }
        if searcher.palette.is_some() {
            let (lo, hi) = searcher.palette.unwrap();
            if (hi - lo + 1) < q.len() as i64 {
                return Ok(ExactOutcome::Unsat);
            }
            for (i, &u) in q.iter().enumerate() {
                let value = lo + i as i64;
                searcher.assigned[u] = Some(value);
                searcher.fresh = value + 1;
                for ci in 0..searcher.constraints[u].len() {
                    let Constraint { other, gap } = searcher.constraints[u][ci];
                    if searcher.assigned[other].is_some() {
                        continue;
                    }
                    for widx in 0..searcher.values[other].len() {
                        if searcher.dead_count[other][widx] == 0
                            && (searcher.values[other][widx] - value).abs() < gap
                        {
                            let alive = searcher.kill(other, widx);
                            if !alive {
                                return Ok(ExactOutcome::Unsat);
                            }
                        }
                    }
                }
            }
        }
    }

    if searcher.solve()? {
        let labels = searcher
            .assigned
            .iter()
            .map(|a| a.expect("search returned SAT with unassigned vertex"))
            .collect();
        Ok(ExactOutcome::Sat(Labelling { labels }))
    } else {
        Ok(ExactOutcome::Unsat)
    }
}

/// Exact maximum clique (Bron-Kerbosch with pivoting) for graphs on at most
/// 128 vertices; larger graphs fall back to a greedy clique, which is still
/// a valid lower-bound witness.
pub fn max_clique(g: &MultiGraph) -> Vec<VertexId> {
    let n = g.vertex_count();
    if n == 0 {
        return Vec::new();
    }
    if n > 128 {
        return greedy_clique(g);
    }
    let adj: Vec<u128> = (0..n)
        .map(|v| {
            let mut m = 0u128;
            for w in g.neighbours(v) {
                m |= 1 << w;
            }
            m
        })
        .collect();
    let mut best = 0u128;
    let all = if n == 128 { !0u128 } else { (1u128 << n) - 1 };
    bron_kerbosch(&adj, 0, all, 0, &mut best);
    let mut out: Vec<VertexId> = (0..n).filter(|&v| best >> v & 1 == 1).collect();
    out.sort_unstable();
    out
}

fn bron_kerbosch(adj: &[u128], r: u128, mut p: u128, mut x: u128, best: &mut u128) {
    if p == 0 && x == 0 {
        if r.count_ones() > best.count_ones() {
            *best = r;
        }
        return;
    }
    if r.count_ones() + p.count_ones() <= best.count_ones() {
        return;
    }
    // Pivot on the candidate covering the most of P.
    let pivot = {
        let mut choice = 0;
        let mut cover = -1i32;
        let mut scan = p | x;
        while scan != 0 {
            let v = scan.trailing_zeros() as usize;
            scan &= scan - 1;
            let c = (p & adj[v]).count_ones() as i32;
            if c > cover {
                cover = c;
                choice = v;
            }
        }
        choice
    };
    let mut ext = p & !adj[pivot];
    while ext != 0 {
        let v = ext.trailing_zeros() as usize;
        ext &= ext - 1;
        let bit = 1u128 << v;
        bron_kerbosch(adj, r | bit, p & adj[v], x & adj[v], best);
        p &= !bit;
        x |= bit;
    }
}

fn greedy_clique(g: &MultiGraph) -> Vec<VertexId> {
    let n = g.vertex_count();
    let mut order: Vec<VertexId> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
    let mut clique: Vec<VertexId> = Vec::new();
    for v in order {
        if clique.iter().all(|&u| g.has_edge(u, v)) {
            clique.push(v);
        }
    }
    clique.sort_unstable();
    clique
}

#[derive(Debug, Clone)]
pub struct ChromaticResult {
    pub chi: usize,
    pub witness: Labelling,
    /// The clique that certified the lower bound.
    pub clique: Vec<VertexId>,
}

/// Chromatic number by decision search upward from a clique lower bound.
/// `clique_hint` (pairwise adjacent) skips the clique search.
pub fn chromatic_number(
    g: &MultiGraph,
    clique_hint: Option<&[VertexId]>,
    config: &ExactConfig,
) -> Result<ChromaticResult, ExactError> {
    let n = g.vertex_count();
    if n == 0 {
        return Ok(ChromaticResult {
            chi: 0,
            witness: Labelling { labels: vec![] },
            clique: vec![],
        });
    }
    let clique = match clique_hint {
        Some(q) => q.to_vec(),
        None => max_clique(g),
    };
    let mut k = clique.len().max(1);
    loop {
        let lists = ListAssignment::uniform_range(n, k);
        match exact_with_clique(g, &lists, None, Some(&clique), config)? {
            ExactOutcome::Sat(witness) => {
                return Ok(ChromaticResult {
                    chi: k,
                    witness,
                    clique,
                })
            }
            ExactOutcome::Unsat => k += 1,
        }
        if k > n {
            unreachable!("n colours always suffice");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> MultiGraph {
        let mut g = MultiGraph::with_vertices(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b).unwrap();
            }
        }
        g
    }

    fn cycle(n: usize) -> MultiGraph {
        let mut g = MultiGraph::with_vertices(n);
        for v in 0..n {
            g.add_edge(v, (v + 1) % n).unwrap();
        }
        g
    }

    #[test]
    fn triangle_three_colours() {
        let g = cycle(3);
        let lists = ListAssignment::uniform_range(3, 3);
        let cfg = ExactConfig::default();
        match exact_list_colouring(&g, &lists, None, &cfg).unwrap() {
            ExactOutcome::Sat(f) => {
                assert_ne!(f.labels[0], f.labels[1]);
                assert_ne!(f.labels[1], f.labels[2]);
                assert_ne!(f.labels[0], f.labels[2]);
            }
            ExactOutcome::Unsat => panic!("triangle is 3-colourable"),
        }
        let two = ListAssignment::uniform_range(3, 2);
        assert_eq!(
            exact_list_colouring(&g, &two, None, &cfg).unwrap(),
            ExactOutcome::Unsat
        );
    }

    #[test]
    fn separation_makes_triangle_unsat() {
        // Lists {1,2,3} with gap 2 on every edge: no two values differ by 2
        // twice over, so UNSAT.
        let g = cycle(3);
        let mut lists = ListAssignment::new();
        for v in 0..3 {
            lists.insert(v, vec![1, 2, 3]);
        }
        let cfg = ExactConfig::default();
        let out = exact_list_colouring(&g, &lists, Some((&g, 2)), &cfg).unwrap();
        assert_eq!(out, ExactOutcome::Unsat);
    }

    #[test]
    fn separation_sat_with_room() {
        let g = cycle(3);
        let mut lists = ListAssignment::new();
        for v in 0..3 {
            lists.insert(v, vec![0, 2, 4, 6]);
        }
        let cfg = ExactConfig::default();
        match exact_list_colouring(&g, &lists, Some((&g, 2)), &cfg).unwrap() {
            ExactOutcome::Sat(f) => {
                for &(u, v) in g.edges() {
                    assert!((f.labels[u] - f.labels[v]).abs() >= 2);
                }
            }
            ExactOutcome::Unsat => panic!("spread lists admit a gap-2 colouring"),
        }
    }

    #[test]
    fn distinct_lists_force_unique_solution() {
        let g = complete(2);
        let mut lists = ListAssignment::new();
        lists.insert(0, vec![5]);
        lists.insert(1, vec![5, 9]);
        let cfg = ExactConfig::default();
        match exact_list_colouring(&g, &lists, None, &cfg).unwrap() {
            ExactOutcome::Sat(f) => assert_eq!(f.labels, vec![5, 9]),
            ExactOutcome::Unsat => panic!("solvable"),
        }
    }

    #[test]
    fn empty_list_is_unsat() {
        let g = complete(2);
        let mut lists = ListAssignment::new();
        lists.insert(0, vec![]);
        lists.insert(1, vec![1]);
        let cfg = ExactConfig::default();
        assert_eq!(
            exact_list_colouring(&g, &lists, None, &cfg).unwrap(),
            ExactOutcome::Unsat
        );
    }

    #[test]
    fn size_cap_enforced() {
        let g = complete(5);
        let lists = ListAssignment::uniform_range(5, 5);
        let cfg = ExactConfig {
            size_cap: 3,
            node_limit: 1000,
        };
        assert_eq!(
            exact_list_colouring(&g, &lists, None, &cfg).unwrap_err(),
            ExactError::OverCap { got: 5, cap: 3 }
        );
    }

    #[test]
    fn max_clique_on_known_graphs() {
        assert_eq!(max_clique(&complete(6)).len(), 6);
        assert_eq!(max_clique(&cycle(5)).len(), 2);
        let mut g = complete(4);
        let v = g.vertex_count();
        let mut h = MultiGraph::with_vertices(v + 2);
        for &(a, b) in g.edges() {
            h.add_edge(a, b).unwrap();
        }
        h.add_edge(4, 5).unwrap();
        g = h;
        assert_eq!(max_clique(&g), vec![0, 1, 2, 3]);
    }

    #[test]
    fn chromatic_number_of_standards() {
        let cfg = ExactConfig::default();
        assert_eq!(chromatic_number(&complete(7), None, &cfg).unwrap().chi, 7);
        assert_eq!(chromatic_number(&cycle(5), None, &cfg).unwrap().chi, 3);
        assert_eq!(chromatic_number(&cycle(6), None, &cfg).unwrap().chi, 2);
    }

    #[test]
    fn chromatic_witness_is_proper() {
        let cfg = ExactConfig::default();
        let g = cycle(7);
        let res = chromatic_number(&g, None, &cfg).unwrap();
        assert_eq!(res.chi, 3);
        for &(u, v) in g.edges() {
            assert_ne!(res.witness.labels[u], res.witness.labels[v]);
        }
    }

    #[test]
    fn clique_hint_must_be_clique() {
        let g = cycle(4);
        let lists = ListAssignment::uniform_range(4, 2);
        let cfg = ExactConfig::default();
        assert_eq!(
            exact_with_clique(&g, &lists, None, Some(&[0, 2]), &cfg).unwrap_err(),
            ExactError::BadClique(0, 2)
        );
    }

    #[test]
    fn lpq_decision_on_a_path() {
        // L(2,2) on 0-1-2 needs three values pairwise two apart: spread 4.
        let mut g = MultiGraph::with_vertices(3);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        let cfg = ExactConfig::default();
        let pq = LpqParams { p: 2, q: 2 };
        match exact_lpq(&g, &ListAssignment::uniform_range(3, 5), pq, &cfg).unwrap() {
            ExactOutcome::Sat(f) => {
                assert!(crate::labelling::is_valid_lpq(&g, &f, pq).unwrap());
            }
            ExactOutcome::Unsat => panic!("five values suffice"),
        }
        assert_eq!(
            exact_lpq(&g, &ListAssignment::uniform_range(3, 4), pq, &cfg).unwrap(),
            ExactOutcome::Unsat
        );
        assert_eq!(
            exact_lpq(
                &g,
                &ListAssignment::uniform_range(3, 4),
                LpqParams { p: 0, q: 1 },
                &cfg
            )
            .unwrap_err(),
            ExactError::BadGap(0, 1)
        );
    }

    #[test]
    fn lpq_distance_two_gap_really_binds() {
        // Star centre 0: leaves are pairwise at distance two, so q = 3
        // forces leaf values three apart even though p = 1 is free.
        let mut g = MultiGraph::with_vertices(4);
        for leaf in 1..4 {
            g.add_edge(0, leaf).unwrap();
        }
        let cfg = ExactConfig::default();
        let pq = LpqParams { p: 1, q: 3 };
        assert_eq!(
            exact_lpq(&g, &ListAssignment::uniform_range(4, 6), pq, &cfg).unwrap(),
            ExactOutcome::Unsat
        );
        match exact_lpq(&g, &ListAssignment::uniform_range(4, 7), pq, &cfg).unwrap() {
            ExactOutcome::Sat(f) => {
                assert!(crate::labelling::is_valid_lpq(&g, &f, pq).unwrap());
            }
            ExactOutcome::Unsat => panic!("0..6 fits leaves at 0,3,6 with centre 1"),
        }
    }
}
