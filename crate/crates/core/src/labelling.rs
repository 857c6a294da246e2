//! L(p,q)-labellings of graph squares: validity checking, span, the
//! value-sweep greedy, the degeneracy greedy for squares, and lifting an
//! L(t,1)-labelling to an L(p,q)-labelling.

use thiserror::Error;

use crate::graph::{degeneracy_order, MultiGraph, VertexId};
use crate::io::ListAssignment;

/// Total assignment of integer labels to vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labelling {
    pub labels: Vec<i64>,
}

/// Distance-1 gaps must be at least `p`, distance-2 gaps at least `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpqParams {
    pub p: i64,
    pub q: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("labelling covers {got} vertices, graph has {want}")]
    WrongLength { got: usize, want: usize },
    #[error("vertex {0} has no list")]
    MissingList(VertexId),
    #[error("vertex {0} could not be labelled from its list")]
    ListExhausted(VertexId),
    #[error("q must be positive for lifting")]
    ZeroQ,
}

/// First violated pair, if any: `distance` is 1 or 2, the gap found and the
/// gap required.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpqViolation {
    pub u: VertexId,
    pub v: VertexId,
    pub distance: u32,
    pub gap: i64,
    pub required: i64,
}

/// Check the two distance conditions, reporting the first violated pair.
pub fn check_lpq(
    g: &MultiGraph,
    f: &Labelling,
    params: LpqParams,
) -> Result<Result<(), LpqViolation>, LabelError> {
    if f.labels.len() != g.vertex_count() {
        return Err(LabelError::WrongLength {
            got: f.labels.len(),
            want: g.vertex_count(),
        });
    }
    for u in 0..g.vertex_count() {
        let (d1, d2) = g.dist1_dist2(u);
        for (dist, req, others) in [(1u32, params.p, &d1), (2, params.q, &d2)] {
            for &v in others.iter().filter(|&&v| v > u) {
                let gap = (f.labels[u] - f.labels[v]).abs();
                if gap < req {
                    return Ok(Err(LpqViolation {
                        u,
                        v,
                        distance: dist,
                        gap,
                        required: req,
                    }));
                }
            }
        }
    }
    Ok(Ok(()))
}

pub fn is_valid_lpq(g: &MultiGraph, f: &Labelling, params: LpqParams) -> Result<bool, LabelError> {
    Ok(check_lpq(g, f, params)?.is_ok())
}

/// Span of a labelling: `max - min + 1`, or `None` when empty.
pub fn span(f: &Labelling) -> Option<i64> {
    let max = f.labels.iter().max()?;
    let min = f.labels.iter().min()?;
    Some(max - min + 1)
}

/// Value upper bound used by the greedy sweep: each vertex is blocked for at
/// most `p` values per neighbour and `q` values per distance-2 vertex once
/// values are taken in increasing order, so `q·Δ·(Δ-1) + p·Δ + 1` values
/// always suffice.
pub fn greedy_value_bound(g: &MultiGraph, params: LpqParams) -> i64 {
    let d = g.max_degree() as i64;
    params.q * d * (d - 1).max(0) + params.p * d + 1
}

/// Greedy labelling by increasing value: sweep label values in ascending
/// order and hand the current value to every still-unlabelled vertex (in id
/// order) compatible with what is already placed.  With `lists = None` the
/// palette is `0..greedy_value_bound`; with lists, every vertex needs a list
/// and a vertex whose list runs out is an error.
pub fn greedy_many_passes(
    g: &MultiGraph,
    params: LpqParams,
    lists: Option<&ListAssignment>,
) -> Result<Labelling, LabelError> {
    let n = g.vertex_count();
    let values: Vec<i64> = match lists {
        None => (0..greedy_value_bound(g, params)).collect(),
        Some(la) => {
            let mut vals = Vec::new();
            for v in 0..n {
                let list = la.get(v).ok_or(LabelError::MissingList(v))?;
                vals.extend_from_slice(list);
            }
            vals.sort_unstable();
            vals.dedup();
            vals
        }
    };
    let around: Vec<(Vec<VertexId>, Vec<VertexId>)> = (0..n).map(|v| g.dist1_dist2(v)).collect();
    let mut labels: Vec<Option<i64>> = vec![None; n];
    let mut placed = 0usize;
    for &value in &values {
        if placed == n {
            break;
        }
        'vertex: for v in 0..n {
            if labels[v].is_some() {
                continue;
            }
            if let Some(la) = lists {
                if la.get(v).unwrap().binary_search(&value).is_err() {
                    continue;
                }
            }
            let (d1, d2) = &around[v];
            for (req, others) in [(params.p, d1), (params.q, d2)] {
                for &w in others.iter() {
                    if let Some(assigned) = labels[w] {
                        if (value - assigned).abs() < req {
                            continue 'vertex;
                        }
                    }
                }
            }
            labels[v] = Some(value);
            placed += 1;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (v, l) in labels.into_iter().enumerate() {
        out.push(l.ok_or(LabelError::ListExhausted(v))?);
    }
    Ok(Labelling { labels: out })
}

#[derive(Debug, Clone)]
pub struct DegeneracyColouring {
    pub labelling: Labelling,
    /// Degeneracy of the input graph (not of its square).
    pub degeneracy: usize,
    pub colours_used: usize,
}

/// Proper colouring of the square by greedy in a degeneracy ordering of the
/// base graph.  The ordering gives every vertex at most `(2q-1)·Δ` earlier
/// square-neighbours, so at most `(2q-1)·Δ + 1` colours appear.
pub fn degeneracy_greedy_square(g: &MultiGraph) -> DegeneracyColouring {
    let sq = g.square();
    let (order, q) = degeneracy_order(g);
    let n = g.vertex_count();
    let mut labels = vec![0i64; n];
    let mut coloured = vec![false; n];
    let mut used = 0usize;
    for &v in &order {
        let mut taken: Vec<i64> = sq
            .neighbours(v)
            .filter(|&w| coloured[w])
            .map(|w| labels[w])
            .collect();
        taken.sort_unstable();
        taken.dedup();
        let mut colour = 0i64;
        for t in taken {
            if t == colour {
                colour += 1;
            } else if t > colour {
                break;
            }
        }
        labels[v] = colour;
        coloured[v] = true;
        used = used.max(colour as usize + 1);
    }
    DegeneracyColouring {
        labelling: Labelling { labels },
        degeneracy: q,
        colours_used: used,
    }
}

/// Mathematical ceiling of `a / b` for `b > 0`.
pub fn ceil_div(a: i64, b: i64) -> i64 {
    let d = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        d
    } else {
        d + 1
    }
}

#[derive(Debug, Clone)]
pub struct LiftOutcome {
    /// The auxiliary L(t,1)-labelling on the shrunk lists.
    pub base: Labelling,
    pub t: i64,
    /// The L(p,q)-labelling read back from the original lists.
    pub lifted: Labelling,
}

/// Solver used for the auxiliary L(t,1) instance inside [`lift_labelling`].
pub type BaseSolver<'a> =
    &'a mut dyn FnMut(&MultiGraph, LpqParams, &ListAssignment) -> Result<Labelling, LabelError>;

/// Reduce L(p,q) to L(t,1) with `t = ceil((p-1)/q) + 1`: shrink each list by
/// `k -> ceil(k/q)`, solve for gaps `t` at distance 1 and distinctness at
/// distance 2, then pick for every vertex the largest original value that
/// maps onto its auxiliary label.  Distance-1 gaps then satisfy
/// `|f(u)-f(v)| >= q·(|f~(u)-f~(v)| - 1) + 1 >= q·(t-1) + 1 >= p`.
///
/// Picking bucket maxima matters at distance 2: when every list is a
/// union of complete buckets (any contiguous range is), the chosen values
/// are exact multiples of `q` apart, meeting the full distance-2 gap;
/// with bucket-punctured lists only distinctness is guaranteed there.
pub fn lift_labelling(
    g: &MultiGraph,
    params: LpqParams,
    lists: &ListAssignment,
    base_solver: BaseSolver,
) -> Result<LiftOutcome, LabelError> {
    if params.q <= 0 {
        return Err(LabelError::ZeroQ);
    }
    let t = ceil_div(params.p - 1, params.q) + 1;
    let n = g.vertex_count();
    let mut shrunk = ListAssignment::new();
    for v in 0..n {
        let list = lists.get(v).ok_or(LabelError::MissingList(v))?;
        let tilde: Vec<i64> = list.iter().map(|&k| ceil_div(k, params.q)).collect();
        shrunk.insert(v, tilde);
    }
    let base = base_solver(g, LpqParams { p: t, q: 1 }, &shrunk)?;
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let want = base.labels[v];
        let k = lists
            .get(v)
            .unwrap()
            .iter()
            .copied()
            .rev()
            .find(|&k| ceil_div(k, params.q) == want)
            .ok_or(LabelError::ListExhausted(v))?;
        labels.push(k);
    }
    Ok(LiftOutcome {
        base,
        t,
        lifted: Labelling { labels },
    })
}
