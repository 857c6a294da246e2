//! Membership tests for the matching polytope of a multigraph: per-vertex
//! marginal sums at most 1, and for every odd vertex set `W` of size at
//! least 3, the induced edge sum at most `(|W|−1)/2`.  A scale in `(0, 1]`
//! shrinks every bound, so scale `1−δ` tests for interior depth `δ`.

use crate::graph::{MultiGraph, VertexId};
use crate::matching::{MatchingError, Value};
use num_rational::Rational64;
use num_traits::{One, Zero};

/// Odd-set enumeration is exhaustive, so vertex counts are capped.
pub const VERTEX_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum PolytopeViolation<T: Value> {
    /// Marginal mass at `vertex` exceeds the (scaled) bound of 1.
    Vertex { vertex: VertexId, sum: T },
    /// The edges induced by the odd set `vertices` carry more than the
    /// (scaled) bound `(|W|−1)/2`.
    OddSet {
        vertices: Vec<VertexId>,
        edge_sum: T,
        bound: Rational64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeVerdict<T: Value> {
    pub inside: bool,
    pub violation: Option<PolytopeViolation<T>>,
    pub scale: Rational64,
    pub strict: bool,
}

fn validated<'a, T: Value>(
    h: &MultiGraph,
    x: &'a [T],
    scale: Rational64,
) -> Result<&'a [T], MatchingError> {
    if !(scale > Rational64::zero() && scale <= Rational64::one()) {
        return Err(MatchingError::BadScale);
    }
    if x.len() != h.edge_count() {
        return Err(MatchingError::LengthMismatch {
            expected: h.edge_count(),
            got: x.len(),
        });
    }
    for (e, v) in x.iter().enumerate() {
        if !v.is_valid() || *v < T::zero() {
            return Err(MatchingError::BadMarginal(e));
        }
    }
    Ok(x)
}

/// Does `sum` break the bound?  In weak mode only a clear excess counts;
/// in strict mode reaching the bound (up to slop) already fails.
fn breaks<T: Value>(sum: &T, bound: &T, strict: bool) -> bool {
    if strict {
        *sum >= bound.clone() - T::slop()
    } else {
        *sum > bound.clone() + T::slop()
    }
}

/// Vertex conditions alone, with no cap: the partial verdict used when odd
/// sets cannot be enumerated.
pub(crate) fn vertex_conditions_only<T: Value>(
    h: &MultiGraph,
    x: &[T],
    scale: Rational64,
    strict: bool,
) -> PolytopeVerdict<T> {
    let bound = T::from_rational(scale);
    for v in 0..h.vertex_count() {
        let sum = h
            .incident_edges(v)
            .iter()
            .fold(T::zero(), |acc, &e| acc + x[e].clone());
        if breaks(&sum, &bound, strict) {
            return PolytopeVerdict {
                inside: false,
                violation: Some(PolytopeViolation::Vertex { vertex: v, sum }),
                scale,
                strict,
            };
        }
    }
    PolytopeVerdict {
        inside: true,
        violation: None,
        scale,
        strict,
    }
}

fn check<T: Value>(
    h: &MultiGraph,
    x: &[T],
    scale: Rational64,
    strict: bool,
) -> Result<PolytopeVerdict<T>, MatchingError> {
    let x = validated(h, x, scale)?;
    let n = h.vertex_count();
    if n > VERTEX_CAP {
        return Err(MatchingError::OverVertexCap {
            vertices: n,
            cap: VERTEX_CAP,
        });
    }
    let vertex_verdict = vertex_conditions_only(h, x, scale, strict);
    if !vertex_verdict.inside {
        return Ok(vertex_verdict);
    }
    for mask in 0u32..(1u32 << n) {
        let k = mask.count_ones();
        if k % 2 == 0 || k < 3 {
            continue;
        }
        let mut edge_sum = T::zero();
        for (e, &(a, b)) in h.edges().iter().enumerate() {
            if mask >> a & 1 == 1 && mask >> b & 1 == 1 {
                edge_sum = edge_sum + x[e].clone();
            }
        }
        let bound = scale * Rational64::new(k as i64 - 1, 2);
        if breaks(&edge_sum, &T::from_rational(bound), strict) {
            return Ok(PolytopeVerdict {
                inside: false,
                violation: Some(PolytopeViolation::OddSet {
                    vertices: (0..n).filter(|&v| mask >> v & 1 == 1).collect(),
                    edge_sum,
                    bound,
                }),
                scale,
                strict,
            });
        }
    }
    Ok(PolytopeVerdict {
        inside: true,
        violation: None,
        scale,
        strict,
    })
}

/// Is `x/scale` in the matching polytope of `h`?
pub fn in_matching_polytope<T: Value>(
    h: &MultiGraph,
    x: &[T],
    scale: Rational64,
) -> Result<PolytopeVerdict<T>, MatchingError> {
    check(h, x, scale, false)
}

/// Is `x/scale` strictly inside the matching polytope (every constraint a
/// strict inequality)?  Boundary points fail here but pass the weak test.
pub fn in_matching_polytope_strict<T: Value>(
    h: &MultiGraph,
    x: &[T],
    scale: Rational64,
) -> Result<PolytopeVerdict<T>, MatchingError> {
    check(h, x, scale, true)
}
