//! Partial colorings and the coloring text format.

use std::fmt::Write as _;

use crate::cover::{ColorId, DPCover};
use crate::error::{Error, Result};
use crate::graph::parse_fields;

/// A partial map from vertices to colors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialColoring {
    assignment: Vec<Option<ColorId>>,
}

impl PartialColoring {
    pub fn empty(n: usize) -> Self {
        PartialColoring {
            assignment: vec![None; n],
        }
    }

    pub fn from_assignment(assignment: Vec<Option<ColorId>>) -> Self {
        PartialColoring { assignment }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Option<ColorId> {
        self.assignment[v]
    }

    pub fn set(&mut self, v: usize, c: ColorId) {
        self.assignment[v] = Some(c);
    }

    pub fn unset(&mut self, v: usize) {
        self.assignment[v] = None;
    }

    pub fn is_total(&self) -> bool {
        self.assignment.iter().all(Option::is_some)
    }

    pub fn colored_count(&self) -> usize {
        self.assignment.iter().filter(|c| c.is_some()).count()
    }

    /// `(vertex, color)` pairs of the assigned vertices.
    pub fn assigned(&self) -> impl Iterator<Item = (usize, ColorId)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(v, c)| c.map(|c| (v, c)))
    }

    pub fn as_slice(&self) -> &[Option<ColorId>] {
        &self.assignment
    }

    /// Every assigned color lies in its vertex's list.
    pub fn respects_lists(&self, cover: &DPCover) -> bool {
        self.len() == cover.vertex_count()
            && self
                .assigned()
                .all(|(v, c)| cover.list(v).binary_search(&c).is_ok())
    }
}

/// One `v c` line per assigned vertex, followed by `OK` when `verified`.
pub fn write_coloring(phi: &PartialColoring, verified: bool) -> String {
    let mut out = String::new();
    for (v, c) in phi.assigned() {
        let _ = writeln!(out, "{v} {c}");
    }
    if verified {
        out.push_str("OK\n");
    }
    out
}

/// Reads a coloring over `n` vertices. A trailing `OK` line is accepted and ignored.
pub fn read_coloring(text: &str, n: usize) -> Result<PartialColoring> {
    let mut phi = PartialColoring::empty(n);
    let mut seen_ok = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if seen_ok {
            return Err(Error::malformed(lineno, "content after the OK trailer"));
        }
        if line == "OK" {
            seen_ok = true;
            continue;
        }
        let [v, c] = parse_fields::<2>(line, lineno)?;
        if v >= n {
            return Err(Error::malformed(lineno, format!("vertex {v} out of range [0, {n})")));
        }
        if phi.get(v).is_some() {
            return Err(Error::malformed(lineno, format!("vertex {v} colored twice")));
        }
        let c = ColorId::try_from(c)
            .map_err(|_| Error::malformed(lineno, format!("color {c} out of range")))?;
        phi.set(v, c);
    }
    Ok(phi)
}
