//! Core algorithms for colouring squares of graphs: structural transforms,
//! extremal test families, L(p,q)-labelling solvers, the removable-vertex
//! reduction with its violating-set search, and the hard-core matching
//! machinery behind the iterative edge colourer.

pub mod arith;
pub mod colourer;
pub mod exact;
pub mod generators;
pub mod graph;
pub mod io;
pub mod labelling;
pub mod matching;
pub mod mincut;
pub mod polytope;
pub mod reduction;

pub use graph::{
    apply_minor_ops, degeneracy_order, subdivide, EdgeId, GraphError, MinorLog, MinorOp,
    MultiGraph, Subdivision, VertexId,
};
pub use io::{FormatError, ListAssignment};
pub use labelling::{Labelling, LpqParams};
