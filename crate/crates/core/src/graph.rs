//! Simple undirected graphs in compressed adjacency form, instance generators,
//! and `K_{1,s,t}` subgraph detection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub type VertexId = u32;

/// Finite simple undirected graph. Neighbor lists are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<VertexId>,
}

impl Graph {
    /// Builds a graph on `n` vertices. Duplicate edges (in either orientation) collapse.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > VertexId::MAX as usize {
            return Err(Error::Parameter(format!("{n} vertices exceed the id range")));
        }
        let mut arcs = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Malformed {
                    line: None,
                    msg: format!("edge ({u}, {v}) has an endpoint outside [0, {n})"),
                });
            }
            if u == v {
                return Err(Error::Malformed {
                    line: None,
                    msg: format!("self-loop at vertex {u}"),
                });
            }
            arcs.push((u as VertexId, v as VertexId));
            arcs.push((v as VertexId, u as VertexId));
        }
        Ok(Self::from_arcs(n, arcs))
    }

    /// `arcs` must be symmetric and loop-free; duplicates are removed here.
    pub(crate) fn from_arcs(n: usize, arcs: Vec<(VertexId, VertexId)>) -> Graph {
        let (offsets, neighbors) = crate::csr::from_arcs(n, &arcs);
        Graph { offsets, neighbors }
    }

    pub fn empty(n: usize) -> Graph {
        Graph {
            offsets: vec![0; n + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn path(n: usize) -> Graph {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    /// Cycle `0-1-...-(n-1)-0`; edge `i` joins `i` and `(i+1) mod n`.
    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return Err(Error::Parameter(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Graph {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
            .expect("complete graph edges are valid")
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[VertexId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count()).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as VertexId)).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Checks the structural invariants; used by tests on generator output.
    pub fn is_well_formed(&self) -> bool {
        let n = self.vertex_count();
        (0..n).all(|v| {
            let nb = self.neighbors(v);
            nb.windows(2).all(|w| w[0] < w[1])
                && nb
                    .iter()
                    .all(|&u| (u as usize) < n && u as usize != v && self.has_edge(u as usize, v))
        })
    }

    /// Whether some vertex has a neighborhood containing `K_{s,t}`, i.e. whether the
    /// graph has a (not necessarily induced) `K_{1,s,t}` subgraph.
    pub fn contains_k1st(&self, s: usize, t: usize) -> bool {
        assert!(s >= 1 && t >= 1, "part sizes must be positive");
        let (small, large) = (s.min(t), s.max(t));
        (0..self.vertex_count()).any(|c| {
            let nb = self.neighbors(c);
            nb.len() >= small + large && self.biclique_in(nb, small, large)
        })
    }

    /// Searches `pool` (sorted) for disjoint `A`, `B` with `|A| = small`,
    /// `|B| >= large` and every `A`-`B` pair adjacent.
    fn biclique_in(&self, pool: &[VertexId], small: usize, large: usize) -> bool {
        fn grow(
            g: &Graph,
            pool: &[VertexId],
            start: usize,
            left: usize,
            common: &[VertexId],
            large: usize,
        ) -> bool {
            if left == 0 {
                return common.len() >= large;
            }
            for i in start..=pool.len().saturating_sub(left) {
                let a = pool[i] as usize;
                let next: Vec<VertexId> =
                    common.iter().copied().filter(|&w| g.has_edge(a, w as usize)).collect();
                if next.len() >= large && grow(g, pool, i + 1, left - 1, &next, large) {
                    return true;
                }
            }
            false
        }
        grow(self, pool, 0, small, pool, large)
    }
}

pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    Graph::from_edges(n, edges.iter().copied())
}

pub fn max_degree(g: &Graph) -> usize {
    g.max_degree()
}

pub fn contains_k1st(g: &Graph, s: usize, t: usize) -> bool {
    g.contains_k1st(s, t)
}

const REGULAR_RESTARTS: usize = 1000;

/// Random simple `d`-regular graph on `n` vertices, deterministic in `seed`.
///
/// Configuration-model points are paired one pair at a time; a pair that would
/// form a loop or a repeated edge is redrawn, and the whole pairing restarts when
/// the remaining points admit no valid pair.
pub fn gen_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= n || (n * d) % 2 != 0 {
        return Err(Error::Parameter(format!(
            "no simple {d}-regular graph on {n} vertices (need d < n and n*d even)"
        )));
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..REGULAR_RESTARTS {
        if let Some(adj) = try_pairing(n, d, &mut rng) {
            let arcs = adj
                .iter()
                .enumerate()
                .flat_map(|(u, nb)| nb.iter().map(move |&v| (u as VertexId, v)))
                .collect();
            return Ok(Graph::from_arcs(n, arcs));
        }
    }
    Err(Error::RetryExhausted {
        what: "random regular generation",
        attempts: REGULAR_RESTARTS as u64,
        violations: Vec::new(),
    })
}

fn try_pairing<R: Rng>(n: usize, d: usize, rng: &mut R) -> Option<Vec<Vec<VertexId>>> {
    let mut adj: Vec<Vec<VertexId>> = vec![Vec::with_capacity(d); n];
    let mut points: Vec<VertexId> =
        (0..n as VertexId).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    points.shuffle(rng);
    let mut misses = 0usize;
    while points.len() >= 2 {
        let i = rng.gen_range(0..points.len());
        let mut j = rng.gen_range(0..points.len() - 1);
        if j >= i {
            j += 1;
        }
        let (u, v) = (points[i], points[j]);
        if u != v && !adj[u as usize].contains(&v) {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
            let (hi, lo) = (i.max(j), i.min(j));
            points.swap_remove(hi);
            points.swap_remove(lo);
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 64 + points.len() {
            let stuck = !points.iter().enumerate().any(|(a, &x)| {
                points[a + 1..]
                    .iter()
                    .any(|&y| x != y && !adj[x as usize].contains(&y))
            });
            if stuck {
                return None;
            }
            misses = 0;
        }
    }
    Some(adj)
}

/// Complete tripartite graph with parts `[0,a)`, `[a,a+s)`, `[a+s,a+s+t)`.
pub fn gen_complete_tripartite(a: usize, s: usize, t: usize) -> Result<Graph> {
    if a == 0 || s == 0 || t == 0 {
        return Err(Error::Parameter(format!(
            "part sizes must be positive, got ({a}, {s}, {t})"
        )));
    }
    let n = a + s + t;
    let part = |v: usize| (v >= a) as u8 + (v >= a + s) as u8;
    Graph::from_edges(
        n,
        (0..n).flat_map(|u| (u + 1..n).filter(move |&v| part(u) != part(v)).map(move |v| (u, v))),
    )
}

/// Parses the edge-list format: a header line `n m` followed by `m` lines `u v`.
pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(1, "missing header line `n m`"))?;
    let [n, m] = parse_fields::<2>(header, hline)?;
    let mut edges = Vec::with_capacity(m);
    for (lineno, line) in lines.by_ref().take(m) {
        let [u, v] = parse_fields::<2>(line, lineno)?;
        if u >= n || v >= n {
            return Err(Error::malformed(lineno, format!("endpoint out of range [0, {n})")));
        }
        if u == v {
            return Err(Error::malformed(lineno, format!("self-loop at vertex {u}")));
        }
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(Error::malformed(
            text.lines().count().max(1),
            format!("expected {m} edge lines, found {}", edges.len()),
        ));
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::malformed(lineno, "unexpected content after the last edge"));
    }
    Graph::from_edges(n, edges)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.vertex_count(), g.edge_count());
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Parses exactly `N` whitespace-separated unsigned integers.
pub(crate) fn parse_fields<const N: usize>(line: &str, lineno: usize) -> Result<[usize; N]> {
    let mut out = [0usize; N];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        let tok = it
            .next()
            .ok_or_else(|| Error::malformed(lineno, format!("expected {N} fields")))?;
        *slot = tok
            .parse()
            .map_err(|_| Error::malformed(lineno, format!("`{tok}` is not a nonnegative integer")))?;
    }
    if it.next().is_some() {
        return Err(Error::malformed(lineno, format!("expected {N} fields")));
    }
    Ok(out)
}
