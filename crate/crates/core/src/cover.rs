//! DP-covers (correspondence covers).
//!
//! A cover of a graph `G` is a list assignment `L` partitioning a set of colors,
//! together with a cover graph `H` on those colors. Between the lists of two
//! vertices, the edges of `H` form a matching, and that matching is empty unless
//! the two vertices are adjacent in `G`. A coloring is proper when its image is
//! independent in `H`.
//!
//! Colors carry dense ids `0..color_count`. Covers produced by [`DPCover::restrict`]
//! remember the ids their colors and vertices had in the cover they were first
//! built from (the *origin* ids), which keys all per-color randomness.

use std::fmt;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::coloring::PartialColoring;
use crate::csr;
use crate::error::{Error, Result};
use crate::graph::{parse_fields, Graph, VertexId};
use crate::rng::seeded_rng;

pub type ColorId = u32;

const NO_OWNER: VertexId = VertexId::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DPCover {
    base: Graph,
    owner: Vec<VertexId>,
    lists: Vec<Vec<ColorId>>,
    adj_offsets: Vec<usize>,
    adj: Vec<ColorId>,
    color_origin: Vec<ColorId>,
    vertex_origin: Vec<VertexId>,
}

/// The first clause of the cover definition that fails, with a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverViolation {
    ColorWithoutOwner { color: ColorId },
    ColorInTwoLists { color: ColorId, first: VertexId, second: VertexId },
    ListNotIndependent { vertex: VertexId, a: ColorId, b: ColorId },
    NotAMatching { color: ColorId, other: VertexId, a: ColorId, b: ColorId },
    MatchingOnNonEdge { u: VertexId, v: VertexId, a: ColorId, b: ColorId },
}

impl fmt::Display for CoverViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CoverViolation::*;
        match self {
            ColorWithoutOwner { color } => {
                write!(f, "lists do not partition the colors: color {color} is in no list")
            }
            ColorInTwoLists { color, first, second } => write!(
                f,
                "lists do not partition the colors: color {color} is in the lists of {first} and {second}"
            ),
            ListNotIndependent { vertex, a, b } => {
                write!(f, "list not independent: L({vertex}) contains the cover edge {a}-{b}")
            }
            NotAMatching { color, other, a, b } => write!(
                f,
                "not a matching: color {color} has two neighbors {a} and {b} in L({other})"
            ),
            MatchingOnNonEdge { u, v, a, b } => write!(
                f,
                "matching on a non-edge: cover edge {a}-{b} joins L({u}) and L({v}) but {u}{v} is not an edge"
            ),
        }
    }
}

/// Output of [`DPCover::restrict`]: the induced cover plus maps from its ids to the
/// ids of the cover it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    pub cover: DPCover,
    pub vertex_map: Vec<VertexId>,
    pub color_map: Vec<ColorId>,
}

impl DPCover {
    /// Assembles a cover without checking the cover clauses (see [`DPCover::validate`]).
    /// Only id ranges and loop-freeness of `H` are enforced here.
    pub fn from_parts(
        base: Graph,
        color_count: usize,
        mut lists: Vec<Vec<ColorId>>,
        edges: &[(ColorId, ColorId)],
    ) -> Result<DPCover> {
        let n = base.vertex_count();
        if lists.len() != n {
            return Err(Error::Parameter(format!(
                "{} lists given for {n} vertices",
                lists.len()
            )));
        }
        if color_count > ColorId::MAX as usize {
            return Err(Error::Parameter(format!("{color_count} colors exceed the id range")));
        }
        let mut owner = vec![NO_OWNER; color_count];
        for (v, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &c in list.iter() {
                if c as usize >= color_count {
                    return Err(Error::Parameter(format!(
                        "color {c} in L({v}) is outside [0, {color_count})"
                    )));
                }
                if owner[c as usize] == NO_OWNER {
                    owner[c as usize] = v as VertexId;
                }
            }
        }
        let mut arcs = Vec::with_capacity(2 * edges.len());
        for &(a, b) in edges {
            if a as usize >= color_count || b as usize >= color_count {
                return Err(Error::Parameter(format!(
                    "cover edge {a}-{b} has an endpoint outside [0, {color_count})"
                )));
            }
            if a == b {
                return Err(Error::Parameter(format!("cover edge {a}-{a} is a loop")));
            }
            arcs.push((a, b));
            arcs.push((b, a));
        }
        let (adj_offsets, adj) = csr::from_arcs(color_count, &arcs);
        Ok(DPCover {
            base,
            owner,
            lists,
            adj_offsets,
            adj,
            color_origin: (0..color_count as ColorId).collect(),
            vertex_origin: (0..n as VertexId).collect(),
        })
    }

    /// Every vertex gets `k` fresh colors; color `j` of `u` is matched to color `j` of `v`
    /// along every edge `uv`. Color `j` of vertex `v` has id `v*k + j`.
    pub fn identity(g: &Graph, k: usize) -> Result<DPCover> {
        Self::shifted(g, k, |_, _| false)
    }

    /// Identity cover of the cycle `C_n`, except that along each edge `i` listed in
    /// `twists` (joining `i` and `i+1 mod n`), color `j` of `i` meets color `(j+1) mod k`
    /// of `i+1`.
    pub fn twisted_cycle(n: usize, k: usize, twists: &[usize]) -> Result<DPCover> {
        if let Some(&bad) = twists.iter().find(|&&i| i >= n) {
            return Err(Error::Parameter(format!("twist index {bad} outside [0, {n})")));
        }
        let g = Graph::cycle(n)?;
        Self::shifted(&g, k, |u, v| {
            let i = if (u + 1) % n == v { u } else { v };
            twists.contains(&i)
        })
    }

    fn shifted(g: &Graph, k: usize, twisted: impl Fn(usize, usize) -> bool) -> Result<DPCover> {
        if k == 0 {
            return Err(Error::Parameter("at least one color per vertex is required".into()));
        }
        let n = g.vertex_count();
        let color = |v: usize, j: usize| (v * k + j) as ColorId;
        let lists = (0..n).map(|v| (0..k).map(|j| color(v, j)).collect()).collect();
        let mut edges = Vec::with_capacity(g.edge_count() * k);
        for (u, v) in g.edges() {
            // orient along the cycle direction when deciding on a twist
            let (from, to) = if (u + 1) % n == v || !((v + 1) % n == u) { (u, v) } else { (v, u) };
            let shift = usize::from(twisted(from, to));
            for j in 0..k {
                edges.push((color(from, j), color(to, (j + shift) % k)));
            }
        }
        Self::from_parts(g.clone(), n * k, lists, &edges)
    }

    /// Random partial matchings: along each edge `uv` (with `u < v`), a uniform random
    /// permutation pairs `L(u)` with `L(v)` and each pair is kept independently with
    /// probability `p`.
    pub fn random(g: &Graph, k: usize, p: f64, seed: u64) -> Result<DPCover> {
        if k == 0 {
            return Err(Error::Parameter("at least one color per vertex is required".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("matching density {p} outside [0, 1]")));
        }
        let n = g.vertex_count();
        let mut rng = seeded_rng(seed);
        let color = |v: usize, j: usize| (v * k + j) as ColorId;
        let lists = (0..n).map(|v| (0..k).map(|j| color(v, j)).collect()).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut edges = Vec::new();
        for (u, v) in g.edges() {
            perm.shuffle(&mut rng);
            for (j, &pj) in perm.iter().enumerate() {
                if rng.gen_bool(p) {
                    edges.push((color(u, j), color(v, pj)));
                }
            }
        }
        Self::from_parts(g.clone(), n * k, lists, &edges)
    }

    #[inline]
    pub fn base(&self) -> &Graph {
        &self.base
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.lists.len()
    }

    #[inline]
    pub fn color_count(&self) -> usize {
        self.owner.len()
    }

    #[inline]
    pub fn list(&self, v: usize) -> &[ColorId] {
        &self.lists[v]
    }

    pub fn lists(&self) -> &[Vec<ColorId>] {
        &self.lists
    }

    #[inline]
    pub fn owner(&self, c: ColorId) -> Option<VertexId> {
        let o = self.owner[c as usize];
        (o != NO_OWNER).then_some(o)
    }

    /// Owner of a color of a validated cover.
    #[inline]
    pub(crate) fn owner_unchecked(&self, c: ColorId) -> usize {
        self.owner[c as usize] as usize
    }

    #[inline]
    pub fn cover_neighbors(&self, c: ColorId) -> &[ColorId] {
        let c = c as usize;
        &self.adj[self.adj_offsets[c]..self.adj_offsets[c + 1]]
    }

    #[inline]
    pub fn cover_degree(&self, c: ColorId) -> usize {
        let c = c as usize;
        self.adj_offsets[c + 1] - self.adj_offsets[c]
    }

    pub fn max_cover_degree(&self) -> usize {
        (0..self.color_count() as ColorId)
            .map(|c| self.cover_degree(c))
            .max()
            .unwrap_or(0)
    }

    pub fn cover_edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    /// Cover edges `(a, b)` with `a < b` in lexicographic order.
    pub fn cover_edges(&self) -> impl Iterator<Item = (ColorId, ColorId)> + '_ {
        (0..self.color_count() as ColorId).flat_map(move |a| {
            self.cover_neighbors(a)
                .iter()
                .filter(move |&&b| a < b)
                .map(move |&b| (a, b))
        })
    }

    /// Id of color `c` in the cover this one was (transitively) restricted from.
    #[inline]
    pub fn color_origin(&self, c: ColorId) -> ColorId {
        self.color_origin[c as usize]
    }

    #[inline]
    pub fn vertex_origin(&self, v: usize) -> VertexId {
        self.vertex_origin[v]
    }

    /// The cover graph `H` as a plain graph on the colors.
    pub fn cover_graph(&self) -> Graph {
        let arcs = (0..self.color_count() as ColorId)
            .flat_map(|a| self.cover_neighbors(a).iter().map(move |&b| (a, b)))
            .collect();
        Graph::from_arcs(self.color_count(), arcs)
    }

    /// Checks, in order: the lists partition the colors; each list is independent in `H`;
    /// cross-list edges form matchings; matchings between non-adjacent vertices are empty.
    pub fn validate(&self) -> std::result::Result<(), CoverViolation> {
        let mut seen = vec![NO_OWNER; self.color_count()];
        for (v, list) in self.lists.iter().enumerate() {
            for &c in list {
                let prev = seen[c as usize];
                if prev != NO_OWNER {
                    return Err(CoverViolation::ColorInTwoLists {
                        color: c,
                        first: prev,
                        second: v as VertexId,
                    });
                }
                seen[c as usize] = v as VertexId;
            }
        }
        if let Some(c) = seen.iter().position(|&o| o == NO_OWNER) {
            return Err(CoverViolation::ColorWithoutOwner { color: c as ColorId });
        }
        for (a, b) in self.cover_edges() {
            let (oa, ob) = (self.owner[a as usize], self.owner[b as usize]);
            if oa == ob {
                return Err(CoverViolation::ListNotIndependent { vertex: oa, a, b });
            }
        }
        for a in 0..self.color_count() as ColorId {
            let mut by_owner: Vec<(VertexId, ColorId)> = self
                .cover_neighbors(a)
                .iter()
                .map(|&b| (self.owner[b as usize], b))
                .collect();
            by_owner.sort_unstable();
            if let Some(w) = by_owner.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(CoverViolation::NotAMatching {
                    color: a,
                    other: w[0].0,
                    a: w[0].1,
                    b: w[1].1,
                });
            }
        }
        for (a, b) in self.cover_edges() {
            let (u, v) = (self.owner[a as usize], self.owner[b as usize]);
            if !self.base.has_edge(u as usize, v as usize) {
                return Err(CoverViolation::MatchingOnNonEdge { u, v, a, b });
            }
        }
        Ok(())
    }

    /// Colors of `L(v)` with no cover-neighbor in the image of `phi`.
    pub fn residual_list(&self, phi: &PartialColoring, v: usize) -> Result<Vec<ColorId>> {
        if let Some(c) = phi.get(v) {
            return Err(Error::Contract(format!(
                "residual list requested for vertex {v}, which is colored with {c}"
            )));
        }
        let used = |c: ColorId| {
            phi.get(self.owner_unchecked(c)) == Some(c)
        };
        Ok(self
            .list(v)
            .iter()
            .copied()
            .filter(|&c| !self.cover_neighbors(c).iter().any(|&x| used(x)))
            .collect())
    }

    /// The first cover edge (in [`DPCover::cover_edges`] order) with both ends in the image.
    pub fn first_conflict(&self, phi: &PartialColoring) -> Option<(ColorId, ColorId)> {
        let mut in_image = vec![false; self.color_count()];
        for (_, c) in phi.assigned() {
            in_image[c as usize] = true;
        }
        self.cover_edges()
            .find(|&(a, b)| in_image[a as usize] && in_image[b as usize])
    }

    /// The image of `phi` is independent in `H`.
    pub fn is_proper(&self, phi: &PartialColoring) -> bool {
        self.first_conflict(phi).is_none()
    }

    /// Mean cover degree over `L(v)`, in double precision.
    pub fn avg_color_degree(&self, v: usize) -> Result<f64> {
        let list = self.list(v);
        if list.is_empty() {
            return Err(Error::UndefinedAverage { vertex: v });
        }
        let total: usize = list.iter().map(|&c| self.cover_degree(c)).sum();
        Ok(total as f64 / list.len() as f64)
    }

    /// Induced cover on the kept colors over the induced base graph. `keep_colors[i]`
    /// is the set kept for vertex `keep_vertices[i]` and must lie inside its list.
    /// New ids preserve the relative order of old ids.
    pub fn restrict(
        &self,
        keep_vertices: &[VertexId],
        keep_colors: &[Vec<ColorId>],
    ) -> Result<Restriction> {
        if keep_vertices.len() != keep_colors.len() {
            return Err(Error::Parameter(format!(
                "{} vertices but {} color sets",
                keep_vertices.len(),
                keep_colors.len()
            )));
        }
        let mut order: Vec<usize> = (0..keep_vertices.len()).collect();
        order.sort_unstable_by_key(|&i| keep_vertices[i]);

        let mut new_vertex = vec![NO_OWNER; self.vertex_count()];
        let mut vertex_map = Vec::with_capacity(order.len());
        for &i in &order {
            let v = keep_vertices[i] as usize;
            if v >= self.vertex_count() {
                return Err(Error::Contract(format!("kept vertex {v} does not exist")));
            }
            if new_vertex[v] != NO_OWNER {
                return Err(Error::Contract(format!("vertex {v} kept twice")));
            }
            new_vertex[v] = vertex_map.len() as VertexId;
            vertex_map.push(v as VertexId);
        }

        let mut keep = vec![false; self.color_count()];
        for &i in &order {
            let v = keep_vertices[i] as usize;
            for &c in &keep_colors[i] {
                if c as usize >= self.color_count() || self.owner[c as usize] != v as VertexId {
                    return Err(Error::Contract(format!(
                        "color {c} kept for vertex {v} is not in L({v})"
                    )));
                }
                keep[c as usize] = true;
            }
        }
        let mut new_color = vec![ColorId::MAX; self.color_count()];
        let mut color_map = Vec::new();
        for (c, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            new_color[c] = color_map.len() as ColorId;
            color_map.push(c as ColorId);
        }

        let lists = vertex_map
            .iter()
            .map(|&v| {
                self.lists[v as usize]
                    .iter()
                    .filter(|&&c| keep[c as usize])
                    .map(|&c| new_color[c as usize])
                    .collect()
            })
            .collect::<Vec<Vec<ColorId>>>();
        let owner = color_map
            .iter()
            .map(|&c| new_vertex[self.owner[c as usize] as usize])
            .collect();
        let mut adj_offsets = Vec::with_capacity(color_map.len() + 1);
        adj_offsets.push(0);
        let mut adj = Vec::new();
        for &c in &color_map {
            adj.extend(
                self.cover_neighbors(c)
                    .iter()
                    .filter(|&&x| keep[x as usize])
                    .map(|&x| new_color[x as usize]),
            );
            adj_offsets.push(adj.len());
        }
        let arcs = vertex_map
            .iter()
            .enumerate()
            .flat_map(|(nu, &u)| {
                let new_vertex = &new_vertex;
                self.base
                    .neighbors(u as usize)
                    .iter()
                    .filter(move |&&w| new_vertex[w as usize] != NO_OWNER)
                    .map(move |&w| (nu as VertexId, new_vertex[w as usize]))
            })
            .collect();
        let base = Graph::from_arcs(vertex_map.len(), arcs);
        let cover = DPCover {
            base,
            owner,
            lists,
            adj_offsets,
            adj,
            color_origin: color_map.iter().map(|&c| self.color_origin[c as usize]).collect(),
            vertex_origin: vertex_map.iter().map(|&v| self.vertex_origin[v as usize]).collect(),
        };
        Ok(Restriction {
            cover,
            vertex_map,
            color_map,
        })
    }
}

pub fn validate_cover(c: &DPCover) -> std::result::Result<(), CoverViolation> {
    c.validate()
}

pub fn identity_cover(g: &Graph, k: usize) -> Result<DPCover> {
    DPCover::identity(g, k)
}

pub fn twisted_cycle_cover(n: usize, k: usize, twists: &[usize]) -> Result<DPCover> {
    DPCover::twisted_cycle(n, k, twists)
}

pub fn random_cover(g: &Graph, k: usize, p: f64, seed: u64) -> Result<DPCover> {
    DPCover::random(g, k, p, seed)
}

pub fn residual_list(c: &DPCover, phi: &PartialColoring, v: usize) -> Result<Vec<ColorId>> {
    c.residual_list(phi, v)
}

pub fn is_proper(c: &DPCover, phi: &PartialColoring) -> bool {
    c.is_proper(phi)
}

pub fn avg_color_degree(c: &DPCover, v: usize) -> Result<f64> {
    c.avg_color_degree(v)
}

pub fn restrict_cover(
    c: &DPCover,
    keep_vertices: &[VertexId],
    keep_colors: &[Vec<ColorId>],
) -> Result<Restriction> {
    c.restrict(keep_vertices, keep_colors)
}

/// Text form: `n colorCount`, then `v k c1 .. ck` per vertex in id order, then
/// `E m` and `m` lines `a b` with `a < b`.
pub fn write_cover(c: &DPCover) -> String {
    let mut out = format!("{} {}\n", c.vertex_count(), c.color_count());
    for (v, list) in c.lists().iter().enumerate() {
        let _ = write!(out, "{v} {}", list.len());
        for x in list {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "E {}", c.cover_edge_count());
    for (a, b) in c.cover_edges() {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

/// Parses the cover text format. The base graph is taken to be the set of vertex
/// pairs joined by at least one cover edge.
pub fn read_cover(text: &str) -> Result<DPCover> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(1, "missing header line `n colorCount`"))?;
    let [n, color_count] = parse_fields::<2>(header, hl)?;
    if color_count > ColorId::MAX as usize || n > VertexId::MAX as usize {
        return Err(Error::malformed(hl, "instance exceeds the id range"));
    }
    let mut owner = vec![NO_OWNER; color_count];
    let mut lists = Vec::with_capacity(n);
    for v in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::malformed(hl, format!("missing list line for vertex {v}")))?;
        let nums = parse_numbers(line, ln)?;
        if nums.len() < 2 || nums[0] != v || nums.len() != nums[1] + 2 {
            return Err(Error::malformed(
                ln,
                format!("expected `{v} k c1 .. ck` with exactly k colors"),
            ));
        }
        let list: Vec<ColorId> = nums[2..].iter().map(|&c| c as ColorId).collect();
        for (&c, &raw) in list.iter().zip(&nums[2..]) {
            if raw >= color_count {
                return Err(Error::malformed(ln, format!("color {raw} outside [0, {color_count})")));
            }
            if owner[c as usize] != NO_OWNER {
                return Err(Error::malformed(ln, format!("color {c} listed twice")));
            }
            owner[c as usize] = v as VertexId;
        }
        lists.push(list);
    }
    if let Some(c) = owner.iter().position(|&o| o == NO_OWNER) {
        return Err(Error::malformed(hl, format!("color {c} belongs to no list")));
    }
    let (el, eline) = lines
        .next()
        .ok_or_else(|| Error::malformed(hl, "missing `E m` line"))?;
    let m = match eline.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["E", m] => m
            .parse::<usize>()
            .map_err(|_| Error::malformed(el, format!("`{m}` is not an edge count")))?,
        _ => return Err(Error::malformed(el, "expected `E m`")),
    };
    let mut edges = Vec::with_capacity(m);
    let mut arcs = Vec::new();
    for _ in 0..m {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::malformed(el, format!("expected {m} cover edges")))?;
        let [a, b] = parse_fields::<2>(line, ln)?;
        if a >= color_count || b >= color_count {
            return Err(Error::malformed(ln, format!("color outside [0, {color_count})")));
        }
        if a == b {
            return Err(Error::malformed(ln, format!("cover edge {a}-{a} is a loop")));
        }
        let (u, v) = (owner[a], owner[b]);
        if u == v {
            return Err(Error::malformed(ln, format!("cover edge {a}-{b} lies inside L({u})")));
        }
        edges.push((a as ColorId, b as ColorId));
        arcs.push((u, v));
        arcs.push((v, u));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::malformed(ln, "unexpected content after the last cover edge"));
    }
    let base = Graph::from_arcs(n, arcs);
    DPCover::from_parts(base, color_count, lists, &edges)
}

fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::malformed(lineno, format!("`{tok}` is not a nonnegative integer")))
        })
        .collect()
}
