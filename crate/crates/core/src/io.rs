//! Plain-text file formats.
//!
//! Edge lists: first line `n m`, then `m` lines `u v` with 0-based vertex
//! ids; parallel edges are repeated lines.  Lists: `k: c1 c2 c3` per keyed
//! id.  Labellings: one `v label` line per vertex in id order, then a
//! `span=<int> valid=<bool>` trailer.  Value vectors: `k: value` lines.
//!
//! Writers emit entries in id order so that write-then-parse is exact.
//! Blank lines and `#` comment lines are ignored on input.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::graph::{GraphError, MultiGraph};
use crate::labelling::{span, Labelling};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("expected {expected} edges, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("labelling misses vertex {0}")]
    MissingVertex(usize),
}

fn bad(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based line numbers, skipping blanks and
/// comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_edge_list(text: &str) -> Result<MultiGraph, FormatError> {
    let mut lines = content_lines(text);
    let (lno, header) = lines.next().ok_or_else(|| bad(0, "empty input"))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(lno, "header must be `n m`"))?;
    let m: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(lno, "header must be `n m`"))?;
    if it.next().is_some() {
        return Err(bad(lno, "header must be `n m`"));
    }
    let mut g = MultiGraph::with_vertices(n);
    let mut found = 0usize;
    for (lno, line) in lines {
        let mut it = line.split_whitespace();
        let u: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(lno, "edge line must be `u v`"))?;
        let v: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(lno, "edge line must be `u v`"))?;
        if it.next().is_some() {
            return Err(bad(lno, "edge line must be `u v`"));
        }
        g.add_edge(u, v)
            .map_err(|source| FormatError::Graph { line: lno, source })?;
        found += 1;
    }
    if found != m {
        return Err(FormatError::EdgeCount { expected: m, found });
    }
    Ok(g)
}

pub fn write_edge_list(g: &MultiGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", g.vertex_count(), g.edge_count());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Integer colour lists keyed by vertex or edge id.  Lists are kept sorted
/// and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ListAssignment {
    map: BTreeMap<usize, Vec<i64>>,
}

impl ListAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: usize, mut colours: Vec<i64>) {
        colours.sort_unstable();
        colours.dedup();
        self.map.insert(key, colours);
    }

    pub fn get(&self, key: usize) -> Option<&[i64]> {
        self.map.get(&key).map(|v| v.as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[i64])> + '_ {
        self.map.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Same list `0..k-1` for every id in `0..count`.
    pub fn uniform_range(count: usize, k: usize) -> Self {
        let palette: Vec<i64> = (0..k as i64).collect();
        let mut la = Self::new();
        for id in 0..count {
            la.insert(id, palette.clone());
        }
        la
    }
}

pub fn parse_lists(text: &str) -> Result<ListAssignment, FormatError> {
    let mut la = ListAssignment::new();
    for (lno, line) in content_lines(text) {
        let (key, rest) = line
            .split_once(':')
            .ok_or_else(|| bad(lno, "list line must be `k: c1 c2 ...`"))?;
        let key: usize = key
            .trim()
            .parse()
            .map_err(|_| bad(lno, "bad id before `:`"))?;
        let mut colours = Vec::new();
        for tok in rest.split_whitespace() {
            let c: i64 = tok
                .parse()
                .map_err(|_| bad(lno, format!("bad colour `{tok}`")))?;
            colours.push(c);
        }
        la.insert(key, colours);
    }
    Ok(la)
}

pub fn write_lists(la: &ListAssignment) -> String {
    let mut out = String::new();
    for (k, colours) in la.iter() {
        let _ = write!(out, "{k}:");
        for c in colours {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    out
}

/// Write a total labelling with its computed span and validity verdict.
pub fn write_labelling(f: &Labelling, valid: bool) -> String {
    let mut out = String::new();
    for (v, label) in f.labels.iter().enumerate() {
        let _ = writeln!(out, "{v} {label}");
    }
    let _ = writeln!(out, "span={} valid={}", span(f).unwrap_or(0), valid);
    out
}

/// Parse a labelling file; returns the labelling and the recorded trailer
/// verdict.  The trailer is informational, consumers re-derive validity.
pub fn parse_labelling(text: &str) -> Result<(Labelling, bool), FormatError> {
    let mut by_vertex = BTreeMap::new();
    let mut trailer = None;
    for (lno, line) in content_lines(text) {
        if line.starts_with("span=") {
            let valid_part = line
                .split_whitespace()
                .find_map(|t| t.strip_prefix("valid="))
                .ok_or_else(|| bad(lno, "trailer must be `span=<int> valid=<bool>`"))?;
            let valid: bool = valid_part.parse().map_err(|_| bad(lno, "bad valid flag"))?;
            trailer = Some(valid);
            continue;
        }
        let mut it = line.split_whitespace();
        let v: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(lno, "labelling line must be `v label`"))?;
        let label: i64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(lno, "labelling line must be `v label`"))?;
        if it.next().is_some() {
            return Err(bad(lno, "labelling line must be `v label`"));
        }
        by_vertex.insert(v, label);
    }
    let n = by_vertex.keys().next_back().map_or(0, |&v| v + 1);
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        labels.push(*by_vertex.get(&v).ok_or(FormatError::MissingVertex(v))?);
    }
    Ok((Labelling { labels }, trailer.unwrap_or(false)))
}

/// Parse `k: value` lines into a dense f64 vector; every id in `0..len`
/// must appear exactly once.
pub fn parse_value_vec(text: &str, len: usize) -> Result<Vec<f64>, FormatError> {
    let mut out = vec![None; len];
    for (lno, line) in content_lines(text) {
        let (key, val) = line
            .split_once(':')
            .ok_or_else(|| bad(lno, "value line must be `k: value`"))?;
        let key: usize = key
            .trim()
            .parse()
            .map_err(|_| bad(lno, "bad id before `:`"))?;
        if key >= len {
            return Err(bad(lno, format!("id {key} out of range (len {len})")));
        }
        let val: f64 = val.trim().parse().map_err(|_| bad(lno, "bad value"))?;
        out[key] = Some(val);
    }
    out.into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or(FormatError::MissingVertex(k)))
        .collect()
}

pub fn write_value_vec(values: &[f64]) -> String {
    let mut out = String::new();
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

/// Exact-rational reading of a decimal token such as `-0.375` or `1.2e-3`.
pub fn parse_decimal_rational(tok: &str) -> Option<BigRational> {
    let tok = tok.trim();
    let (mantissa, exp) = match tok.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (tok, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut numer = BigInt::zero();
    for ch in int_part.chars().chain(frac_part.chars()) {
        let d = ch.to_digit(10)?;
        numer = numer * 10 + d;
    }
    let mut value = BigRational::new(numer * sign, BigInt::one());
    let shift = exp - frac_part.len() as i32;
    let ten = BigRational::new(BigInt::from(10), BigInt::one());
    if shift > 0 {
        for _ in 0..shift {
            value *= ten.clone();
        }
    } else {
        for _ in 0..-shift {
            value /= ten.clone();
        }
    }
    Some(value)
}

/// Parse `k: value` lines exactly; companion to [`parse_value_vec`].
pub fn parse_value_vec_exact(text: &str, len: usize) -> Result<Vec<BigRational>, FormatError> {
    let mut out = vec![None; len];
    for (lno, line) in content_lines(text) {
        let (key, val) = line
            .split_once(':')
            .ok_or_else(|| bad(lno, "value line must be `k: value`"))?;
        let key: usize = key
            .trim()
            .parse()
            .map_err(|_| bad(lno, "bad id before `:`"))?;
        if key >= len {
            return Err(bad(lno, format!("id {key} out of range (len {len})")));
        }
        let val = parse_decimal_rational(val).ok_or_else(|| bad(lno, "bad decimal value"))?;
        out[key] = Some(val);
    }
    out.into_iter()
        .enumerate()
        .map(|(k, v)| v.ok_or(FormatError::MissingVertex(k)))
        .collect()
}
