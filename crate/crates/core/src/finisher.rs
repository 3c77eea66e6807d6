//! Completing a coloring once lists dominate degrees, and an exhaustive oracle.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::coloring::PartialColoring;
use crate::cover::{ColorId, DPCover};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub const BRUTE_FORCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinishMethod {
    Greedy,
    Resampling,
    BruteForce,
}

impl fmt::Display for FinishMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FinishMethod::Greedy => "greedy",
            FinishMethod::Resampling => "resampling",
            FinishMethod::BruteForce => "brute-force",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinishReport {
    pub coloring: PartialColoring,
    pub resamples_used: u64,
    pub method: FinishMethod,
}

fn checked(cover: &DPCover, report: FinishReport) -> Result<FinishReport> {
    if report.coloring.is_total() && report.coloring.respects_lists(cover) && cover.is_proper(&report.coloring) {
        Ok(report)
    } else {
        Err(Error::Internal(format!(
            "{} finisher produced an improper coloring",
            report.method
        )))
    }
}

fn require_nonempty_lists(cover: &DPCover) -> Result<()> {
    match (0..cover.vertex_count()).find(|&v| cover.list(v).is_empty()) {
        Some(v) => Err(Error::Contract(format!("L({v}) is empty"))),
        None => Ok(()),
    }
}

/// `|L(v)| >= 8 max deg_H` at every vertex.
pub fn resampling_precondition_holds(cover: &DPCover) -> bool {
    let bound = 8 * cover.max_cover_degree();
    (0..cover.vertex_count()).all(|v| cover.list(v).len() >= bound)
}

pub fn default_max_resamples(cover: &DPCover) -> u64 {
    1_000_000u64.saturating_mul(cover.cover_edge_count() as u64 + 1)
}

/// Conflict-edge resampling: draw a uniform color per vertex, then while some cover edge
/// joins two chosen colors, redraw both endpoints of the lowest such edge.
pub fn finish_by_resampling(
    cover: &DPCover,
    max_resamples: u64,
    seed: u64,
) -> Result<FinishReport> {
    require_nonempty_lists(cover)?;
    if !resampling_precondition_holds(cover) {
        return Err(Error::Contract(format!(
            "lists must have at least 8 * {} colors",
            cover.max_cover_degree()
        )));
    }
    let n = cover.vertex_count();
    let mut rng = seeded_rng(seed);
    let mut chosen = vec![false; cover.color_count()];
    let mut phi = PartialColoring::empty(n);
    let mut conflicts: BTreeSet<(ColorId, ColorId)> = BTreeSet::new();

    let edge = |a: ColorId, b: ColorId| (a.min(b), a.max(b));
    let pick = |v: usize,
                    phi: &mut PartialColoring,
                    chosen: &mut [bool],
                    conflicts: &mut BTreeSet<(ColorId, ColorId)>,
                    rng: &mut rand_chacha::ChaCha8Rng| {
        if let Some(old) = phi.get(v) {
            chosen[old as usize] = false;
            for &x in cover.cover_neighbors(old) {
                conflicts.remove(&edge(old, x));
            }
        }
        let list = cover.list(v);
        let c = list[rng.gen_range(0..list.len())];
        chosen[c as usize] = true;
        phi.set(v, c);
        for &x in cover.cover_neighbors(c) {
            if chosen[x as usize] {
                conflicts.insert(edge(c, x));
            }
        }
    };

    for v in 0..n {
        pick(v, &mut phi, &mut chosen, &mut conflicts, &mut rng);
    }
    let mut used = 0u64;
    while let Some(&(a, b)) = conflicts.first() {
        if used >= max_resamples {
            return Err(Error::RetryExhausted {
                what: "conflict resampling",
                attempts: used,
                violations: Vec::new(),
            });
        }
        used += 1;
        let u = cover.owner_unchecked(a);
        let w = cover.owner_unchecked(b);
        pick(u, &mut phi, &mut chosen, &mut conflicts, &mut rng);
        pick(w, &mut phi, &mut chosen, &mut conflicts, &mut rng);
    }
    checked(
        cover,
        FinishReport {
            coloring: phi,
            resamples_used: used,
            method: FinishMethod::Resampling,
        },
    )
}

/// For every `v`, `|L(v)|` exceeds the number of vertices whose lists are matched to `L(v)`.
pub fn greedy_precondition_holds(cover: &DPCover) -> bool {
    let mut mark = vec![usize::MAX; cover.vertex_count()];
    (0..cover.vertex_count()).all(|v| {
        let mut count = 0;
        for &c in cover.list(v) {
            for &x in cover.cover_neighbors(c) {
                let u = cover.owner_unchecked(x);
                if mark[u] != v {
                    mark[u] = v;
                    count += 1;
                }
            }
        }
        cover.list(v).len() > count
    })
}

/// Vertices in id order, each taking its lowest color with no chosen cover-neighbor.
pub fn finish_greedy(cover: &DPCover) -> Result<FinishReport> {
    require_nonempty_lists(cover)?;
    let mut chosen = vec![false; cover.color_count()];
    let mut phi = PartialColoring::empty(cover.vertex_count());
    for v in 0..cover.vertex_count() {
        let c = cover
            .list(v)
            .iter()
            .copied()
            .find(|&c| !cover.cover_neighbors(c).iter().any(|&x| chosen[x as usize]))
            .ok_or_else(|| Error::Contract(format!("greedy is stuck at vertex {v}")))?;
        chosen[c as usize] = true;
        phi.set(v, c);
    }
    checked(
        cover,
        FinishReport {
            coloring: phi,
            resamples_used: 0,
            method: FinishMethod::Greedy,
        },
    )
}

/// Product of the list sizes, as a float.
pub fn list_product(cover: &DPCover) -> f64 {
    (0..cover.vertex_count())
        .map(|v| cover.list(v).len() as f64)
        .product()
}

/// Backtracking in vertex id order and ascending color order; returns the lexicographically
/// first proper total coloring, or `None` when there is none.
pub fn brute_force_dp_color(cover: &DPCover) -> Result<Option<PartialColoring>> {
    let product = list_product(cover);
    if product > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            product,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let n = cover.vertex_count();
    let mut chosen = vec![false; cover.color_count()];
    let mut pos = vec![0usize; n];
    let mut phi = PartialColoring::empty(n);
    let mut v = 0usize;
    // iterative DFS; pos[v] is the next list index to try at v
    while v < n {
        let list = cover.list(v);
        let mut placed = false;
        while pos[v] < list.len() {
            let c = list[pos[v]];
            pos[v] += 1;
            if !cover.cover_neighbors(c).iter().any(|&x| chosen[x as usize]) {
                chosen[c as usize] = true;
                phi.set(v, c);
                placed = true;
                break;
            }
        }
        if placed {
            v += 1;
            continue;
        }
        pos[v] = 0;
        if v == 0 {
            return Ok(None);
        }
        v -= 1;
        let c = phi.get(v).expect("assigned on the way down");
        chosen[c as usize] = false;
        phi.unset(v);
    }
    Ok(checked(
        cover,
        FinishReport {
            coloring: phi,
            resamples_used: 0,
            method: FinishMethod::BruteForce,
        },
    )?
    .coloring
    .into())
}

/// Greedy when its precondition holds, else resampling when lists are at least
/// `8 max deg_H`, else brute force within its guard.
pub fn finish(cover: &DPCover, seed: u64) -> Result<FinishReport> {
    if greedy_precondition_holds(cover) {
        return finish_greedy(cover);
    }
    if resampling_precondition_holds(cover) {
        return finish_by_resampling(cover, default_max_resamples(cover), seed);
    }
    match brute_force_dp_color(cover)? {
        Some(coloring) => Ok(FinishReport {
            coloring,
            resamples_used: 0,
            method: FinishMethod::BruteForce,
        }),
        None => Err(Error::Contract("the residual cover has no proper coloring".into())),
    }
}
