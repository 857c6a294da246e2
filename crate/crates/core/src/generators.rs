//! Test families: Wegner's planar graphs with large square cliques, the
//! K_{3,3}-free four-block construction, a few standard named graphs, seeded
//! stacked triangulations, and the bounded-density certificate used for
//! minor-closed families.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{MultiGraph, VertexId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("m must be at least 2, got {0}")]
    MTooSmall(usize),
    #[error("n must be at least 3, got {0}")]
    NTooSmall(usize),
    #[error("unknown graph name `{0}`")]
    UnknownName(String),
    #[error("B must be non-empty")]
    EmptyB,
    #[error("B contains out-of-range vertex {0}")]
    BadVertex(VertexId),
}

/// Wegner's planar graph G_k: hub vertices x, y, z, an edge xy, and 3k-1
/// degree-2 vertices (k common neighbours for z,x and z,y; k-1 for x,y).
/// All hub degrees are 2k and every vertex except z lies in one clique of
/// the square, so the square needs 3k+1 colours.
///
/// Vertex ids: x=0, y=1, z=2, then the z-x, z-y, x-y middle vertices in
/// that order.
pub fn wegner_graph(k: usize) -> Result<MultiGraph, GeneratorError> {
    if k < 2 {
        return Err(GeneratorError::KTooSmall(k));
    }
    let (x, y, z) = (0, 1, 2);
    let mut g = MultiGraph::with_vertices(3 + 3 * k - 1);
    let mut next = 3;
    for _ in 0..k {
        g.add_edge(z, next).unwrap();
        g.add_edge(next, x).unwrap();
        next += 1;
    }
    for _ in 0..k {
        g.add_edge(z, next).unwrap();
        g.add_edge(next, y).unwrap();
        next += 1;
    }
    for _ in 0..k - 1 {
        g.add_edge(x, next).unwrap();
        g.add_edge(next, y).unwrap();
        next += 1;
    }
    g.add_edge(x, y).unwrap();
    Ok(g)
}

/// In `wegner_graph(k)`, every vertex except z (id 2) is within distance 2
/// of every other, giving a (3k+1)-clique in the square.
pub fn wegner_square_clique(k: usize) -> Vec<VertexId> {
    (0..3 + 3 * k - 1).filter(|&v| v != 2).collect()
}

/// Four blocks V_1..V_4 of m vertices plus connectors x_ij adjacent to all
/// of V_i ∪ V_j.  The graph has no K_{3,3} minor yet its square needs at
/// least 4m = 2Δ colours.
///
/// Vertex ids: x_12..x_34 take 0..6 in pair order (1,2),(1,3),(1,4),(2,3),
/// (2,4),(3,4); block V_i occupies 6+(i-1)m .. 6+im-1.
pub fn kkk_free_example(m: usize) -> Result<MultiGraph, GeneratorError> {
    if m < 2 {
        return Err(GeneratorError::MTooSmall(m));
    }
    let mut g = MultiGraph::with_vertices(4 * m + 6);
    let block = |i: usize| -> std::ops::Range<usize> {
        let s = 6 + (i - 1) * m;
        s..s + m
    };
    let pairs = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for v in block(i) {
            g.add_edge(x, v).unwrap();
        }
        for v in block(j) {
            g.add_edge(x, v).unwrap();
        }
    }
    Ok(g)
}

/// The 4m block vertices are pairwise within distance 2 (via a shared
/// connector), giving a 4m-clique in the square of `kkk_free_example(m)`.
pub fn kkk_square_clique(m: usize) -> Vec<VertexId> {
    (6..6 + 4 * m).collect()
}

pub fn named_graph(name: &str) -> Result<MultiGraph, GeneratorError> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "c5" => {
            let mut g = MultiGraph::with_vertices(5);
            for v in 0..5 {
                g.add_edge(v, (v + 1) % 5).unwrap();
            }
            Ok(g)
        }
        "petersen" => {
            let mut g = MultiGraph::with_vertices(10);
            for v in 0..5 {
                g.add_edge(v, (v + 1) % 5).unwrap(); // outer cycle
                g.add_edge(5 + v, 5 + (v + 2) % 5).unwrap(); // inner pentagram
                g.add_edge(v, 5 + v).unwrap(); // spokes
            }
            Ok(g)
        }
        "k4" => {
            let mut g = MultiGraph::with_vertices(4);
            for a in 0..4 {
                for b in a + 1..4 {
                    g.add_edge(a, b).unwrap();
                }
            }
            Ok(g)
        }
        "octahedron" => {
            // K_{2,2,2}: antipodal pairs (0,1), (2,3), (4,5).
            let mut g = MultiGraph::with_vertices(6);
            for a in 0..6 {
                for b in a + 1..6 {
                    if b != a + 1 || a % 2 != 0 {
                        g.add_edge(a, b).unwrap();
                    }
                }
            }
            Ok(g)
        }
        _ => {
            if let Some((a, b)) = parse_biclique(&lower) {
                let mut g = MultiGraph::with_vertices(a + b);
                for u in 0..a {
                    for v in a..a + b {
                        g.add_edge(u, v).unwrap();
                    }
                }
                return Ok(g);
            }
            Err(GeneratorError::UnknownName(name.to_string()))
        }
    }
}

/// Accepts `k_{a,b}` and `k_a_b`.
fn parse_biclique(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("k_")?;
    let inner = rest
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or(rest);
    let (a, b) = inner.split_once([',', '_'])?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Stacked (Apollonian-style) triangulation: starting from a triangle, each
/// new vertex lands in a uniformly chosen face and joins its three corners.
/// Planar and simple by construction, with 3n-6 edges for n ≥ 3.
pub fn random_planar_triangulation(n: usize, seed: u64) -> Result<MultiGraph, GeneratorError> {
    if n < 3 {
        return Err(GeneratorError::NTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = MultiGraph::with_vertices(n);
    g.add_edge(0, 1).unwrap();
    g.add_edge(1, 2).unwrap();
    g.add_edge(2, 0).unwrap();
    // Both sides of the starting triangle count as faces.
    let mut faces = vec![[0, 1, 2], [0, 1, 2]];
    for v in 3..n {
        let idx = rng.gen_range(0..faces.len());
        let [a, b, c] = faces[idx];
        g.add_edge(v, a).unwrap();
        g.add_edge(v, b).unwrap();
        g.add_edge(v, c).unwrap();
        faces[idx] = [a, b, v];
        faces.push([b, c, v]);
        faces.push([a, c, v]);
    }
    Ok(g)
}

/// Density certificate for a vertex set B: A collects the outside vertices
/// with at least three distinct neighbours in B, and the test is
/// `e(A,B) ≤ beta·|B|` under the double-counting convention (A and B are
/// disjoint here, so each A-B edge counts once).
#[derive(Debug, Clone)]
pub struct NiceCertificateReport {
    pub b: Vec<VertexId>,
    pub a: Vec<VertexId>,
    pub e_ab: u64,
    pub beta: Rational64,
    pub pass: bool,
}

pub fn check_nice_condition(
    g: &MultiGraph,
    b: &[VertexId],
    beta: Rational64,
) -> Result<NiceCertificateReport, GeneratorError> {
    if b.is_empty() {
        return Err(GeneratorError::EmptyB);
    }
    let n = g.vertex_count();
    let mut in_b = vec![false; n];
    for &v in b {
        if v >= n {
            return Err(GeneratorError::BadVertex(v));
        }
        in_b[v] = true;
    }
    let mut a = Vec::new();
    for v in 0..n {
        if in_b[v] {
            continue;
        }
        let nbrs_in_b = g
            .distinct_neighbours(v)
            .iter()
            .filter(|&&w| in_b[w])
            .count();
        if nbrs_in_b >= 3 {
            a.push(v);
        }
    }
    let mut in_a = vec![false; n];
    for &v in &a {
        in_a[v] = true;
    }
    let e_ab = g.edges_between(&in_a, &in_b);
    let b_sorted = {
        let mut s = b.to_vec();
        s.sort_unstable();
        s.dedup();
        s
    };
    let pass = Rational64::from_integer(e_ab as i64)
        <= beta * Rational64::from_integer(b_sorted.len() as i64);
    Ok(NiceCertificateReport {
        b: b_sorted,
        a,
        e_ab,
        beta,
        pass,
    })
}

/// Triangle count of the underlying simple graph.
pub fn count_triangles(g: &MultiGraph) -> u64 {
    let s = g.simplified();
    let n = s.vertex_count();
    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in s.edges() {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    let mut count = 0u64;
    for &(u, v) in s.edges() {
        let (u, v) = (u.min(v), u.max(v));
        for w in v + 1..n {
            if adj[u][w] && adj[v][w] {
                count += 1;
            }
        }
    }
    count
}
