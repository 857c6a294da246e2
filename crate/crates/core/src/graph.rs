//! Multigraph representation plus the structural transforms the rest of the
//! toolkit builds on: squares, subdivisions, line graphs, minor operations and
//! degeneracy orderings.
//!
//! Graphs are multigraphs without loops.  Vertices and edges carry dense
//! integer ids.  Deleting a vertex renumbers the tail so ids stay dense;
//! anything holding ids across a mutation must remap them.

use std::collections::BTreeSet;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("loop at vertex {0} is not allowed")]
    LoopEdge(VertexId),
    #[error("vertex {0} out of range")]
    BadVertex(VertexId),
    #[error("edge {0} out of range")]
    BadEdge(EdgeId),
    #[error("vertex {keep} is not an endpoint of edge {edge}")]
    NotAnEndpoint { edge: EdgeId, keep: VertexId },
}

/// Loopless multigraph with dense vertex and edge ids.
///
/// Parallel edges are distinct edges with the same endpoint pair.  Edge ids
/// are assigned in insertion order and endpoints keep their inserted
/// orientation, so writing and re-reading a graph is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiGraph {
    n: usize,
    edges: Vec<(VertexId, VertexId)>,
    incident: Vec<Vec<EdgeId>>,
}

impl MultiGraph {
    pub fn with_vertices(n: usize) -> Self {
        MultiGraph {
            n,
            edges: Vec::new(),
            incident: vec![Vec::new(); n],
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId, GraphError> {
        if u == v {
            return Err(GraphError::LoopEdge(u));
        }
        let hi = u.max(v);
        if hi >= self.n {
            return Err(GraphError::BadVertex(hi));
        }
        let id = self.edges.len();
        self.edges.push((u, v));
        self.incident[u].push(id);
        self.incident[v].push(id);
        Ok(id)
    }

    pub fn endpoints(&self, e: EdgeId) -> (VertexId, VertexId) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    /// Edge ids incident to `v`, in insertion order.
    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v]
    }

    /// Degree counting parallel edges.
    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Neighbours of `v` with multiplicity, in incident-edge order.
    pub fn neighbours(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.incident[v].iter().map(move |&e| self.other_end(e, v))
    }

    /// Sorted distinct neighbours of `v`.
    pub fn distinct_neighbours(&self, v: VertexId) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self.neighbours(v).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn other_end(&self, e: EdgeId, v: VertexId) -> VertexId {
        let (a, b) = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// True if some edge joins `u` and `v`.
    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        if self.degree(u) <= self.degree(v) {
            self.neighbours(u).any(|w| w == v)
        } else {
            self.neighbours(v).any(|w| w == u)
        }
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = BTreeSet::new();
        for &(u, v) in &self.edges {
            if !seen.insert((u.min(v), u.max(v))) {
                return false;
            }
        }
        true
    }

    /// Underlying simple graph: one edge per adjacent pair, pairs in
    /// lexicographic order.
    pub fn simplified(&self) -> MultiGraph {
        let mut pairs = BTreeSet::new();
        for &(u, v) in &self.edges {
            pairs.insert((u.min(v), u.max(v)));
        }
        let mut g = MultiGraph::with_vertices(self.n);
        for (u, v) in pairs {
            g.add_edge(u, v).unwrap();
        }
        g
    }

    /// Edge count between vertex sets under the double-counting convention:
    /// an edge with both endpoints in `U ∩ W` contributes twice.
    ///
    /// Masks must have length `vertex_count()`.
    pub fn edges_between(&self, in_u: &[bool], in_w: &[bool]) -> u64 {
        let mut total = 0u64;
        for &(a, b) in &self.edges {
            if in_u[a] && in_w[b] {
                total += 1;
            }
            if in_u[b] && in_w[a] {
                total += 1;
            }
        }
        total
    }

    /// BFS distances from `src`, cut off at `cap` (inclusive) when given.
    pub fn bfs_distances(&self, src: VertexId, cap: Option<u32>) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.n];
        dist[src] = Some(0);
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            if let Some(c) = cap {
                if d >= c {
                    continue;
                }
            }
            for w in self.neighbours(v) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Distinct vertices at distance exactly 1 and exactly 2 from `v`.
    pub fn dist1_dist2(&self, v: VertexId) -> (Vec<VertexId>, Vec<VertexId>) {
        let d1 = self.distinct_neighbours(v);
        let mut seen = vec![false; self.n];
        seen[v] = true;
        for &w in &d1 {
            seen[w] = true;
        }
        let mut d2 = Vec::new();
        for &w in &d1 {
            for x in self.neighbours(w) {
                if !seen[x] {
                    seen[x] = true;
                    d2.push(x);
                }
            }
        }
        d2.sort_unstable();
        (d1, d2)
    }

    /// The square: a simple graph on the same vertices joining every pair at
    /// distance 1 or 2.
    pub fn square(&self) -> MultiGraph {
        let mut sq = MultiGraph::with_vertices(self.n);
        let mut mark = vec![false; self.n];
        for v in 0..self.n {
            mark[v] = true;
            let mut within = Vec::new();
            for w in self.neighbours(v) {
                if !mark[w] {
                    mark[w] = true;
                    within.push(w);
                }
                for x in self.neighbours(w) {
                    if !mark[x] {
                        mark[x] = true;
                        within.push(x);
                    }
                }
            }
            within.sort_unstable();
            for &w in &within {
                if w > v {
                    sq.add_edge(v, w).unwrap();
                }
            }
            mark[v] = false;
            for w in within {
                mark[w] = false;
            }
        }
        sq
    }

    /// Line graph: one vertex per edge id, simple, adjacent iff the edges
    /// share an endpoint.  Parallel edges share both endpoints and so are
    /// adjacent.
    pub fn line_graph(&self) -> MultiGraph {
        let mut pairs = BTreeSet::new();
        for v in 0..self.n {
            let inc = &self.incident[v];
            for i in 0..inc.len() {
                for j in i + 1..inc.len() {
                    let (a, b) = (inc[i].min(inc[j]), inc[i].max(inc[j]));
                    pairs.insert((a, b));
                }
            }
        }
        let mut lg = MultiGraph::with_vertices(self.edges.len());
        for (a, b) in pairs {
            lg.add_edge(a, b).unwrap();
        }
        lg
    }

    fn delete_vertex(&self, v: VertexId) -> MultiGraph {
        let mut g = MultiGraph::with_vertices(self.n - 1);
        let remap = |x: VertexId| if x > v { x - 1 } else { x };
        for &(a, b) in &self.edges {
            if a != v && b != v {
                g.add_edge(remap(a), remap(b)).unwrap();
            }
        }
        g
    }

    fn delete_edge(&self, e: EdgeId) -> MultiGraph {
        let mut g = MultiGraph::with_vertices(self.n);
        for (id, &(a, b)) in self.edges.iter().enumerate() {
            if id != e {
                g.add_edge(a, b).unwrap();
            }
        }
        g
    }

    /// Contract edge `e`, keeping endpoint `keep` as the merged vertex.  The
    /// other endpoint disappears (ids above it shift down).  Parallel mates
    /// of `e` become loops and are dropped; all other parallel edges survive.
    fn contract_edge(&self, e: EdgeId, keep: VertexId) -> Result<MultiGraph, GraphError> {
        let (a, b) = self.edges[e];
        if keep != a && keep != b {
            return Err(GraphError::NotAnEndpoint { edge: e, keep });
        }
        let gone = if keep == a { b } else { a };
        let mut g = MultiGraph::with_vertices(self.n - 1);
        let remap = |x: VertexId| {
            let x = if x == gone { keep } else { x };
            if x > gone {
                x - 1
            } else {
                x
            }
        };
        for &(u, v) in &self.edges {
            let (ru, rv) = (remap(u), remap(v));
            if ru != rv {
                g.add_edge(ru, rv).unwrap();
            }
        }
        Ok(g)
    }
}

/// One step of a minor derivation.  Ids refer to the graph as it stands when
/// the step applies, after all renumbering from earlier steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinorOp {
    DeleteVertex(VertexId),
    DeleteEdge(EdgeId),
    ContractEdge { edge: EdgeId, keep: VertexId },
    AddEdge(VertexId, VertexId),
}

pub type MinorLog = Vec<MinorOp>;

/// Replay a minor log.  An add-edge step makes the result a minor of the
/// input plus the added edges; producers keep add-edge restricted to the
/// two neighbours of a deleted degree-2 vertex so the log stays checkable.
pub fn apply_minor_ops(g: &MultiGraph, log: &[MinorOp]) -> Result<MultiGraph, GraphError> {
    let mut cur = g.clone();
    for &op in log {
        cur = match op {
            MinorOp::DeleteVertex(v) => {
                if v >= cur.n {
                    return Err(GraphError::BadVertex(v));
                }
                cur.delete_vertex(v)
            }
            MinorOp::DeleteEdge(e) => {
                if e >= cur.edges.len() {
                    return Err(GraphError::BadEdge(e));
                }
                cur.delete_edge(e)
            }
            MinorOp::ContractEdge { edge, keep } => {
                if edge >= cur.edges.len() {
                    return Err(GraphError::BadEdge(edge));
                }
                cur.contract_edge(edge, keep)?
            }
            MinorOp::AddEdge(u, v) => {
                let mut next = cur;
                next.add_edge(u, v)?;
                next
            }
        };
    }
    Ok(cur)
}

/// A subdivision together with the edge-to-core bijection: `core[e]` is the
/// new degree-2 vertex sitting on base edge `e`.  Base vertices keep their
/// ids; core vertex ids start at the base vertex count.
#[derive(Debug, Clone)]
pub struct Subdivision {
    pub graph: MultiGraph,
    pub core: Vec<VertexId>,
}

/// Subdivide every edge once.  The core vertices induce nothing in the
/// subdivision itself, and in its square they induce the line graph of the
/// base (parallel base edges give adjacent core vertices).
pub fn subdivide(h: &MultiGraph) -> Subdivision {
    let n = h.vertex_count();
    let m = h.edge_count();
    let mut g = MultiGraph::with_vertices(n + m);
    let mut core = Vec::with_capacity(m);
    for (id, &(u, v)) in h.edges().iter().enumerate() {
        let c = n + id;
        g.add_edge(u, c).unwrap();
        g.add_edge(c, v).unwrap();
        core.push(c);
    }
    Subdivision { graph: g, core }
}

/// Degeneracy ordering by repeated removal of a minimum-degree vertex
/// (smallest id breaks ties).  Returns `(ordering, q)` where each vertex has
/// at most `q` neighbours earlier in the ordering, and `q` is the degeneracy.
pub fn degeneracy_order(g: &MultiGraph) -> (Vec<VertexId>, usize) {
    let n = g.vertex_count();
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut deletion = Vec::with_capacity(n);
    let mut q = 0usize;
    // Bucket queue over current degrees; lazy deletion keeps it simple.
    let maxd = deg.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<VertexId>> = vec![Vec::new(); maxd + 1];
    for v in (0..n).rev() {
        buckets[deg[v]].push(v);
    }
    let mut floor = 0usize;
    for _ in 0..n {
        let mut d = floor;
        let v = loop {
            while d < buckets.len() && buckets[d].is_empty() {
                d += 1;
            }
            let cand = *buckets[d].last().unwrap();
            if removed[cand] || deg[cand] != d {
                buckets[d].pop();
                continue;
            }
            break cand;
        };
        buckets[d].pop();
        removed[v] = true;
        q = q.max(d);
        deletion.push(v);
        for w in g.neighbours(v) {
            if !removed[w] {
                deg[w] -= 1;
                buckets[deg[w]].push(w);
            }
        }
        floor = d.saturating_sub(1);
    }
    deletion.reverse();
    (deletion, q)
}
