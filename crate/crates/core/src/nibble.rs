//! One round of the wasteful coloring procedure.
//!
//! A round on a cover with parameters `(d, ell, eta)`:
//!
//! 1. every color is *activated* independently with probability `eta/ell`;
//! 2. every color `c` flips an *equalizing coin* that succeeds with probability
//!    `keep / (1 - eta/ell)^deg(c)`, so that each color is kept with probability
//!    exactly `keep`;
//! 3. a color is *kept* when its coin succeeded and none of its cover-neighbors
//!    was activated;
//! 4. a vertex with an activated kept color takes the lowest such color;
//! 5. each kept color `c` survives into the next list `L'(v)` when at most `2 d'`
//!    of its neighbors are kept and belong to uncolored vertices.
//!
//! Randomness for color `c` is `Prf(seed, stream)` evaluated at the color's origin id,
//! so a round is a pure function of `(cover, params, seed)`.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::coloring::PartialColoring;
use crate::cover::{ColorId, DPCover, Restriction};
use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::graph::VertexId;
use crate::rng::{derive_seed, stream, Prf};

/// Absolute slack for comparisons of real-valued quantities against thresholds.
pub const TOL: f64 = 1e-9;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundParams {
    /// Degree bound; the cover must satisfy `max deg_H <= 2 d`.
    pub d: f64,
    /// Nominal list size.
    pub ell: f64,
    /// Activation scale; colors activate with probability `eta / ell`.
    pub eta: f64,
    /// Current drift of list sizes and degrees from their nominal values.
    pub eps: f64,
    pub s: usize,
    pub t: usize,
    pub seed: u64,
}

impl RoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.d.is_finite() && self.d > 0.0) {
            return bad(format!("d = {} must be positive", self.d));
        }
        if !(self.ell.is_finite() && self.ell > 0.0) {
            return bad(format!("ell = {} must be positive", self.ell));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return bad(format!("eta = {} must be nonnegative", self.eta));
        }
        if self.eta / self.ell >= 1.0 {
            return bad(format!(
                "activation probability eta/ell = {} must be below 1",
                self.eta / self.ell
            ));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return bad(format!("eps = {} must be nonnegative", self.eps));
        }
        if self.s == 0 || self.t == 0 {
            return bad("s and t must be positive".into());
        }
        Ok(())
    }

    #[inline]
    pub fn activation_probability(&self) -> f64 {
        self.eta / self.ell
    }

    /// `d^(-1/(200 t))`.
    pub fn beta(&self) -> f64 {
        self.d.powf(-1.0 / (200.0 * self.t as f64))
    }

    pub fn derived(&self) -> Result<RoundDerived> {
        self.validate()?;
        RoundDerived::compute(self.d, self.ell, self.eta)
    }

    pub fn with_seed(self, seed: u64) -> Self {
        RoundParams { seed, ..self }
    }

    pub(crate) fn bounds(&self, derived: &RoundDerived) -> ConditionBounds {
        ConditionBounds {
            slack: (1.0 + 3.0 * self.eta) * self.eps + self.beta(),
            ell_prime: derived.ell_prime,
            d_prime: derived.d_prime,
        }
    }
}

/// The quantities a round is designed around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDerived {
    /// Probability that any given color is kept.
    pub keep: f64,
    /// Upper bound on the probability that a vertex stays uncolored.
    pub uncolor: f64,
    pub ell_prime: f64,
    pub d_prime: f64,
}

impl RoundDerived {
    /// `keep = (1 - eta/ell)^(2d)`, `uncolor = (1 - eta/ell)^(keep*ell/2)`,
    /// `ell' = keep*ell`, `d' = keep*uncolor*d`.
    pub fn compute(d: f64, ell: f64, eta: f64) -> Result<RoundDerived> {
        let q = eta / ell;
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Parameter(format!(
                "activation probability eta/ell = {q} must lie in [0, 1)"
            )));
        }
        let log_miss = (-q).ln_1p();
        let keep = (2.0 * d * log_miss).exp();
        let uncolor = (keep * ell / 2.0 * log_miss).exp();
        Ok(RoundDerived {
            keep,
            uncolor,
            ell_prime: keep * ell,
            d_prime: keep * uncolor * d,
        })
    }
}

pub fn keep_factor(p: &RoundParams) -> Result<f64> {
    Ok(p.derived()?.keep)
}

pub fn uncolor_factor(p: &RoundParams) -> Result<f64> {
    Ok(p.derived()?.uncolor)
}

/// Success probability of the equalizing coin, tabulated by cover degree.
#[derive(Debug, Clone)]
pub(crate) struct EqualizerTable {
    probs: Vec<f64>,
}

impl EqualizerTable {
    /// Entries for degrees `0..=max_degree`; requires `max_degree <= 2d`.
    pub(crate) fn new(p: &RoundParams, max_degree: usize) -> EqualizerTable {
        let log_miss = (-p.activation_probability()).ln_1p();
        let probs = (0..=max_degree)
            .map(|deg| ((2.0 * p.d - deg as f64) * log_miss).exp())
            .collect();
        EqualizerTable { probs }
    }

    #[inline]
    pub(crate) fn get(&self, degree: usize) -> f64 {
        self.probs[degree]
    }
}

/// The two coin streams of a round.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RoundCoins {
    activate: Prf,
    equalize: Prf,
    q: f64,
}

impl RoundCoins {
    pub(crate) fn new(p: &RoundParams) -> RoundCoins {
        RoundCoins {
            activate: Prf::new(p.seed, stream::ACTIVATE),
            equalize: Prf::new(p.seed, stream::EQUALIZE),
            q: p.activation_probability(),
        }
    }

    #[inline]
    pub(crate) fn activated(&self, key: ColorId) -> bool {
        self.activate.unit(key as u64) < self.q
    }

    #[inline]
    pub(crate) fn equalized(&self, key: ColorId, prob: f64) -> bool {
        self.equalize.unit(key as u64) < prob
    }
}

/// Flip both coins for every color of `cover`.
fn flip_all(cover: &DPCover, p: &RoundParams, table: &EqualizerTable) -> (Vec<bool>, Vec<bool>) {
    let coins = RoundCoins::new(p);
    (0..cover.color_count() as ColorId)
        .into_par_iter()
        .map(|c| {
            let key = cover.color_origin(c);
            (
                coins.activated(key),
                coins.equalized(key, table.get(cover.cover_degree(c))),
            )
        })
        .unzip()
}

/// Outcome of steps 1–4 on a cover.
struct Sampled {
    kept: Vec<bool>,
    phi: PartialColoring,
    /// Color belongs to an uncolored vertex.
    in_u: Vec<bool>,
}

fn sample(cover: &DPCover, p: &RoundParams, table: &EqualizerTable) -> Sampled {
    let (activated, mut kept) = flip_all(cover, p, table);
    for (a, _) in activated.iter().enumerate().filter(|(_, &x)| x) {
        for &nb in cover.cover_neighbors(a as ColorId) {
            kept[nb as usize] = false;
        }
    }
    let mut phi = PartialColoring::empty(cover.vertex_count());
    for v in 0..cover.vertex_count() {
        if let Some(&c) = cover
            .list(v)
            .iter()
            .find(|&&c| activated[c as usize] && kept[c as usize])
        {
            phi.set(v, c);
        }
    }
    let in_u = (0..cover.color_count() as ColorId)
        .map(|c| phi.get(cover.owner_unchecked(c)).is_none())
        .collect();
    Sampled {
        kept,
        phi,
        in_u,
    }
}

/// Threshold arithmetic shared by the condition checks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConditionBounds {
    /// `(1 + 3 eta) eps + beta`
    pub slack: f64,
    pub ell_prime: f64,
    pub d_prime: f64,
}

impl ConditionBounds {
    pub fn list_upper(&self) -> f64 {
        (1.0 + self.slack) * self.ell_prime
    }

    pub fn list_lower(&self) -> f64 {
        (1.0 - self.slack) * self.ell_prime / 2.0
    }

    pub fn degree_cap(&self) -> f64 {
        2.0 * self.d_prime
    }

    pub fn average_bound(&self, list_len: usize) -> f64 {
        (2.0 - (1.0 - self.slack) * self.ell_prime / list_len as f64) * self.d_prime
    }

    /// `lambda' avg + (1 - lambda') 2 d'`, written without dividing by the list length.
    pub fn delta_prime(&self, list_len: usize, degree_sum: u64) -> f64 {
        let lambda = list_len as f64 / self.ell_prime;
        degree_sum as f64 / self.ell_prime + (1.0 - lambda) * 2.0 * self.d_prime
    }

    pub fn delta_prime_threshold(&self) -> f64 {
        (1.0 + self.slack) * self.d_prime
    }

    /// Evaluates clauses (i)–(iv) for one vertex of the residual cover. With
    /// `strict_empty`, an empty list always counts as a clause (ii) failure.
    pub fn evaluate(
        &self,
        list_len: usize,
        degree_sum: u64,
        max_degree: usize,
        strict_empty: bool,
        mut report: impl FnMut(Clause, f64, f64),
    ) {
        let len = list_len as f64;
        if len > self.list_upper() + TOL {
            report(Clause::ListTooLarge, len, self.list_upper());
        }
        if len < self.list_lower() - TOL || (strict_empty && list_len == 0) {
            report(Clause::ListTooSmall, len, self.list_lower().max(1.0));
        }
        if max_degree as f64 > self.degree_cap() + TOL {
            report(Clause::DegreeCap, max_degree as f64, self.degree_cap());
        }
        if list_len > 0 {
            let avg = degree_sum as f64 / len;
            let bound = self.average_bound(list_len);
            if avg > bound + TOL {
                report(Clause::AverageDegree, avg, bound);
            }
        }
    }
}

/// The per-vertex guarantees a successful round must deliver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// (i) `|L'(v)| <= (1 + slack) ell'`
    ListTooLarge,
    /// (ii) `|L'(v)| >= (1 - slack) ell' / 2`, and `L'(v)` nonempty
    ListTooSmall,
    /// (iii) every residual color degree is at most `2 d'`
    DegreeCap,
    /// (iv) average residual color degree at most `(2 - (1 - slack) ell'/|L'(v)|) d'`
    AverageDegree,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::ListTooLarge => "(i) list too large",
            Clause::ListTooSmall => "(ii) list too small",
            Clause::DegreeCap => "(iii) color degree above cap",
            Clause::AverageDegree => "(iv) average color degree too high",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionViolation {
    /// Vertex id in the round's input cover.
    pub vertex: VertexId,
    pub clause: Clause,
    pub value: f64,
    pub bound: f64,
}

impl fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vertex {}: {} (value {}, bound {})",
            self.vertex,
            self.clause,
            g12(self.value),
            g12(self.bound)
        )
    }
}

/// Input-side hypotheses of a round that do not affect well-definedness.
#[derive(Debug, Clone, PartialEq)]
pub enum PreconditionViolation {
    /// `(1-eps) ell/2 <= |L(v)| <= (1+eps) ell` fails.
    ListWindow { vertex: VertexId, len: usize, low: f64, high: f64 },
    /// `avg deg(v) <= (2 - (1-eps) ell/|L(v)|) d` fails.
    AverageDegree { vertex: VertexId, avg: f64, bound: f64 },
}

impl fmt::Display for PreconditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreconditionViolation::ListWindow { vertex, len, low, high } => write!(
                f,
                "vertex {vertex}: list size {len} outside [{}, {}]",
                g12(*low),
                g12(*high)
            ),
            PreconditionViolation::AverageDegree { vertex, avg, bound } => write!(
                f,
                "vertex {vertex}: average color-degree {} above {}",
                g12(*avg),
                g12(*bound)
            ),
        }
    }
}

/// What to do when the list-size or average-degree hypotheses fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditions {
    Enforce,
    /// Record the failures in [`RoundOutput::warnings`] and run anyway.
    Warn,
}

/// Checks the list-window and average-degree hypotheses on every vertex.
pub fn precondition_violations(cover: &DPCover, p: &RoundParams) -> Vec<PreconditionViolation> {
    let low = (1.0 - p.eps) * p.ell / 2.0;
    let high = (1.0 + p.eps) * p.ell;
    let mut out = Vec::new();
    for v in 0..cover.vertex_count() {
        let len = cover.list(v).len();
        if (len as f64) < low - TOL || len as f64 > high + TOL {
            out.push(PreconditionViolation::ListWindow {
                vertex: v as VertexId,
                len,
                low,
                high,
            });
        }
        if len > 0 {
            let avg = degree_sum(cover, cover.list(v)) as f64 / len as f64;
            let bound = (2.0 - (1.0 - p.eps) * p.ell / len as f64) * p.d;
            if avg > bound + TOL {
                out.push(PreconditionViolation::AverageDegree {
                    vertex: v as VertexId,
                    avg,
                    bound,
                });
            }
        }
    }
    out
}

fn degree_sum(cover: &DPCover, colors: &[ColorId]) -> u64 {
    colors.iter().map(|&c| cover.cover_degree(c) as u64).sum()
}

/// Per-vertex bookkeeping of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexStats {
    pub vertex: VertexId,
    pub colored: bool,
    /// `|L(v)|`
    pub ell: usize,
    /// `|K(v)|`
    pub k: usize,
    /// `|L'(v)|`
    pub ell_prime: usize,
    /// Average cover degree over `L(v)` in the input cover.
    pub input_avg_degree: f64,
    /// Average over `L'(v)` of the degree into the residual cover (NaN when `L'(v)` is empty).
    pub avg_degree: f64,
    pub lambda: f64,
    pub delta: f64,
    pub lambda_prime: f64,
    pub delta_prime: f64,
    /// Cover edges at `L(v)` with both ends kept.
    pub e_k: usize,
    /// Cover edges at `L(v)` whose far end belongs to an uncolored vertex.
    pub e_u: usize,
    pub e_ku: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub vertices: Vec<VertexStats>,
}

/// Summary of one column of [`RoundStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

type Column = (&'static str, fn(&VertexStats) -> f64);

const STATS_COLUMNS: [Column; 11] = [
    ("ell", |s| s.ell as f64),
    ("k", |s| s.k as f64),
    ("ellPrime", |s| s.ell_prime as f64),
    ("avgdeg", |s| s.avg_degree),
    ("lambda", |s| s.lambda),
    ("delta", |s| s.delta),
    ("lambdaPrime", |s| s.lambda_prime),
    ("deltaPrime", |s| s.delta_prime),
    ("eK", |s| s.e_k as f64),
    ("eU", |s| s.e_u as f64),
    ("eKU", |s| s.e_ku as f64),
];

impl RoundStats {
    /// Min, max and mean of a column over the rows where it is defined.
    pub fn aggregate(&self, column: impl Fn(&VertexStats) -> f64) -> Option<Aggregate> {
        let vals: Vec<f64> = self.vertices.iter().map(column).filter(|x| !x.is_nan()).collect();
        if vals.is_empty() {
            return None;
        }
        Some(Aggregate {
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
        })
    }

    /// One row per vertex, then `min`, `max` and `mean` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex");
        for (name, _) in STATS_COLUMNS {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for s in &self.vertices {
            let _ = write!(out, "{}", s.vertex);
            for (_, col) in STATS_COLUMNS {
                let x = col(s);
                if x.is_nan() {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{}", g12(x));
                }
            }
            out.push('\n');
        }
        let aggs: Vec<Option<Aggregate>> =
            STATS_COLUMNS.iter().map(|(_, col)| self.aggregate(col)).collect();
        for (label, pick) in [
            ("min", (|a: &Aggregate| a.min) as fn(&Aggregate) -> f64),
            ("max", |a| a.max),
            ("mean", |a| a.mean),
        ] {
            out.push_str(label);
            for a in &aggs {
                match a {
                    Some(a) => {
                        let _ = write!(out, ",{}", g12(pick(a)));
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    /// Colors assigned this round, over the input cover's vertices.
    pub phi: PartialColoring,
    /// `L'(v)` for every input vertex, in input color ids. Only the uncolored
    /// vertices' sets enter the residual cover.
    pub pruned_lists: Vec<Vec<ColorId>>,
    /// The cover induced on the uncolored vertices and their pruned lists.
    pub residual: Restriction,
    pub stats: RoundStats,
    pub derived: RoundDerived,
    /// Number of executions it took to pass [`check_conditions`] (1 for a single run).
    pub attempts: u64,
    /// Seed of the execution that produced this output.
    pub seed: u64,
    pub warnings: Vec<PreconditionViolation>,
}

pub fn run_round(cover: &DPCover, p: &RoundParams) -> Result<RoundOutput> {
    run_round_with(cover, p, Preconditions::Enforce)
}

pub fn run_round_with(
    cover: &DPCover,
    p: &RoundParams,
    policy: Preconditions,
) -> Result<RoundOutput> {
    let derived = p.derived()?;
    if let Err(v) = cover.validate() {
        return Err(Error::Contract(format!("round input is not a DP-cover: {v}")));
    }
    let max_deg = cover.max_cover_degree();
    if max_deg as f64 > 2.0 * p.d + TOL {
        return Err(Error::Contract(format!(
            "maximum color degree {max_deg} exceeds 2d = {}",
            g12(2.0 * p.d)
        )));
    }
    let warnings = precondition_violations(cover, p);
    if policy == Preconditions::Enforce {
        if let Some(w) = warnings.first() {
            return Err(Error::Contract(format!("round precondition fails at {w}")));
        }
    }

    let table = EqualizerTable::new(p, max_deg);
    let Sampled {
        kept,
        phi,
        in_u,
    } = sample(cover, p, &table);

    let n = cover.vertex_count();
    let m = cover.color_count();
    let cap = 2.0 * derived.d_prime;
    let ku_degree: Vec<usize> = (0..m as ColorId)
        .map(|c| {
            cover
                .cover_neighbors(c)
                .iter()
                .filter(|&&x| kept[x as usize] && in_u[x as usize])
                .count()
        })
        .collect();
    let pruned_lists: Vec<Vec<ColorId>> = (0..n)
        .map(|v| {
            cover
                .list(v)
                .iter()
                .copied()
                .filter(|&c| kept[c as usize] && ku_degree[c as usize] as f64 <= cap)
                .collect()
        })
        .collect();

    let uncolored: Vec<VertexId> = (0..n as VertexId)
        .filter(|&v| phi.get(v as usize).is_none())
        .collect();
    let keep_colors: Vec<Vec<ColorId>> =
        uncolored.iter().map(|&v| pruned_lists[v as usize].clone()).collect();
    let residual = cover.restrict(&uncolored, &keep_colors)?;

    // statistics
    let mut in_residual = vec![false; m];
    for list in &keep_colors {
        for &c in list {
            in_residual[c as usize] = true;
        }
    }
    let mut vertices = Vec::with_capacity(n);
    for v in 0..n {
        let list = cover.list(v);
        let ell_v = list.len();
        let deg_sum = degree_sum(cover, list);
        let lambda = ell_v as f64 / p.ell;
        let delta = deg_sum as f64 / p.ell + (1.0 - lambda) * 2.0 * p.d;
        let lp = &pruned_lists[v];
        let res_sum: u64 = lp
            .iter()
            .map(|&c| {
                cover
                    .cover_neighbors(c)
                    .iter()
                    .filter(|&&x| in_residual[x as usize])
                    .count() as u64
            })
            .sum();
        let bounds = p.bounds(&derived);
        let (mut k, mut e_k, mut e_u, mut e_ku) = (0, 0, 0, 0);
        for &c in list {
            let nb = cover.cover_neighbors(c);
            e_u += nb.iter().filter(|&&x| in_u[x as usize]).count();
            if kept[c as usize] {
                k += 1;
                e_k += nb.iter().filter(|&&x| kept[x as usize]).count();
                e_ku += ku_degree[c as usize];
            }
        }
        vertices.push(VertexStats {
            vertex: v as VertexId,
            colored: phi.get(v).is_some(),
            ell: ell_v,
            k,
            ell_prime: lp.len(),
            input_avg_degree: if ell_v > 0 { deg_sum as f64 / ell_v as f64 } else { f64::NAN },
            avg_degree: if lp.is_empty() { f64::NAN } else { res_sum as f64 / lp.len() as f64 },
            lambda,
            delta,
            lambda_prime: lp.len() as f64 / derived.ell_prime,
            delta_prime: bounds.delta_prime(lp.len(), res_sum),
            e_k,
            e_u,
            e_ku,
        });
    }

    Ok(RoundOutput {
        phi,
        pruned_lists,
        residual,
        stats: RoundStats { vertices },
        derived,
        attempts: 1,
        seed: p.seed,
        warnings,
    })
}

/// Checks clauses (i)–(iv) on every vertex of the residual cover.
pub fn check_conditions(
    out: &RoundOutput,
    p: &RoundParams,
) -> std::result::Result<(), Vec<ConditionViolation>> {
    let derived = RoundDerived::compute(p.d, p.ell, p.eta)
        .expect("check_conditions called with invalid parameters");
    let bounds = p.bounds(&derived);
    let res = &out.residual.cover;
    let mut violations = Vec::new();
    for v in 0..res.vertex_count() {
        let list = res.list(v);
        let max_deg = list.iter().map(|&c| res.cover_degree(c)).max().unwrap_or(0);
        let vertex = out.residual.vertex_map[v];
        bounds.evaluate(list.len(), degree_sum(res, list), max_deg, true, |clause, value, bound| {
            violations.push(ConditionViolation {
                vertex,
                clause,
                value,
                bound,
            })
        });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Whether a residual vertex with this list size and degree sum meets clauses (ii)
/// and (iv) as inequalities (no special treatment of empty lists).
pub(crate) fn clauses_ii_iv_hold(bounds: &ConditionBounds, list_len: usize, degree_sum: u64) -> bool {
    let mut ok = true;
    bounds.evaluate(list_len, degree_sum, 0, false, |clause, _, _| {
        if matches!(clause, Clause::ListTooSmall | Clause::AverageDegree) {
            ok = false;
        }
    });
    ok
}

/// Residual vertices whose `delta'` is within the bound but which fail clause (ii)
/// or (iv). The arithmetic says this list is always empty.
pub fn delta_prime_implication_failures(out: &RoundOutput, p: &RoundParams) -> Vec<VertexId> {
    let derived = RoundDerived::compute(p.d, p.ell, p.eta).expect("valid parameters");
    let bounds = p.bounds(&derived);
    let res = &out.residual.cover;
    (0..res.vertex_count())
        .filter(|&v| {
            let list = res.list(v);
            let sum = degree_sum(res, list);
            bounds.delta_prime(list.len(), sum) <= bounds.delta_prime_threshold()
                && !clauses_ii_iv_hold(&bounds, list.len(), sum)
        })
        .map(|v| out.residual.vertex_map[v])
        .collect()
}

/// Reruns the round with seeds derived from `p.seed` until [`check_conditions`] passes.
pub fn run_round_until_good(
    cover: &DPCover,
    p: &RoundParams,
    max_attempts: u64,
) -> Result<RoundOutput> {
    run_round_until_good_with(cover, p, max_attempts, Preconditions::Enforce)
}

pub fn run_round_until_good_with(
    cover: &DPCover,
    p: &RoundParams,
    max_attempts: u64,
    policy: Preconditions,
) -> Result<RoundOutput> {
    if max_attempts == 0 {
        return Err(Error::Parameter("max_attempts must be positive".into()));
    }
    let mut last = Vec::new();
    for attempt in 0..max_attempts {
        let trial = p.with_seed(attempt_seed(p.seed, attempt));
        let mut out = run_round_with(cover, &trial, policy)?;
        match check_conditions(&out, &trial) {
            Ok(()) => {
                out.attempts = attempt + 1;
                return Ok(out);
            }
            Err(v) => last = v,
        }
    }
    Err(Error::RetryExhausted {
        what: "nibble round",
        attempts: max_attempts,
        violations: last,
    })
}

/// Seed of attempt number `attempt` (0-based) of a retried round.
pub fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    derive_seed(seed, stream::ATTEMPT, attempt)
}

/// Mean and standard error of an integer-valued sample, accumulated exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub n: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: u64) {
        self.n += 1;
        self.sum += x as u128;
        self.sum_sq += (x as u128) * (x as u128);
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }

    /// Unbiased sample variance; NaN with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as u128;
        // n * sum_sq - sum^2 is exact in integers
        let num = n * self.sum_sq - self.sum * self.sum;
        num as f64 / (self.n as f64 * (self.n - 1) as f64)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Empirical versus predicted per-vertex quantities of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexEstimate {
    pub vertex: VertexId,
    pub ell: usize,
    pub avg_degree: f64,
    pub k: Moments,
    /// `keep * ell(v)`, the exact expectation of `k(v)`.
    pub expected_k: f64,
    pub e_k: Moments,
    /// `keep^2 * ell(v) * avgdeg(v)`; the expectation of `|E_K(v)|` is this up to a factor
    /// that tends to one.
    pub reference_e_k: f64,
    pub e_u: Moments,
    pub e_ku: Moments,
    /// `keep^2 * uncolor * ell(v) * avgdeg(v)`
    pub reference_e_ku: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub trials: u64,
    pub derived: RoundDerived,
    pub vertices: Vec<VertexEstimate>,
}

impl StatsReport {
    /// Fraction of vertices whose mean `k(v)` lies within `z` standard errors of `keep * ell(v)`.
    /// A vertex with zero spread counts when its mean is exact.
    pub fn fraction_k_within(&self, z: f64) -> f64 {
        let ok = self
            .vertices
            .iter()
            .filter(|e| (e.k.mean() - e.expected_k).abs() <= z * e.k.std_error() + TOL)
            .count();
        ok as f64 / self.vertices.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "vertex,ell,avgdeg,mean_k,se_k,expected_k,mean_eK,se_eK,ref_eK,mean_eU,se_eU,mean_eKU,se_eKU,ref_eKU\n",
        );
        let f = |x: f64| if x.is_nan() { String::new() } else { g12(x) };
        for e in &self.vertices {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                e.vertex,
                e.ell,
                f(e.avg_degree),
                f(e.k.mean()),
                f(e.k.std_error()),
                f(e.expected_k),
                f(e.e_k.mean()),
                f(e.e_k.std_error()),
                f(e.reference_e_k),
                f(e.e_u.mean()),
                f(e.e_u.std_error()),
                f(e.e_ku.mean()),
                f(e.e_ku.std_error()),
                f(e.reference_e_ku),
            );
        }
        out
    }
}

/// Monte-Carlo estimates of `k(v)`, `|E_K(v)|`, `|E_U(v)|` and `|E_K(v) ∩ E_U(v)|` over
/// `trials` independent executions of steps 1–4.
pub fn round_statistics(cover: &DPCover, p: &RoundParams, trials: u64) -> Result<StatsReport> {
    if trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    let derived = p.derived()?;
    if let Err(v) = cover.validate() {
        return Err(Error::Contract(format!("input is not a DP-cover: {v}")));
    }
    let max_deg = cover.max_cover_degree();
    if max_deg as f64 > 2.0 * p.d + TOL {
        return Err(Error::Contract(format!(
            "maximum color degree {max_deg} exceeds 2d = {}",
            g12(2.0 * p.d)
        )));
    }
    let n = cover.vertex_count();
    let m = cover.color_count();
    let table = EqualizerTable::new(p, max_deg);
    let mut acc: Vec<[Moments; 4]> = vec![[Moments::default(); 4]; n];

    // neighbor counts of colors outside K, outside U, outside K∩U
    let mut not_k = vec![0u32; m];
    let mut not_u = vec![0u32; m];
    let mut not_ku = vec![0u32; m];
    let mut touched: Vec<ColorId> = Vec::new();
    for trial in 0..trials {
        let tp = p.with_seed(derive_seed(p.seed, stream::TRIAL, trial));
        let s = sample(cover, &tp, &table);
        for x in 0..m as ColorId {
            let (k, u) = (s.kept[x as usize], s.in_u[x as usize]);
            if k && u {
                continue;
            }
            for &c in cover.cover_neighbors(x) {
                let ci = c as usize;
                if not_k[ci] == 0 && not_u[ci] == 0 && not_ku[ci] == 0 {
                    touched.push(c);
                }
                not_k[ci] += u32::from(!k);
                not_u[ci] += u32::from(!u);
                not_ku[ci] += 1;
            }
        }
        for (v, slot) in acc.iter_mut().enumerate() {
            let (mut k, mut ek, mut eu, mut eku) = (0u64, 0u64, 0u64, 0u64);
            for &c in cover.list(v) {
                let ci = c as usize;
                let deg = cover.cover_degree(c) as u64;
                eu += deg - not_u[ci] as u64;
                if s.kept[ci] {
                    k += 1;
                    ek += deg - not_k[ci] as u64;
                    eku += deg - not_ku[ci] as u64;
                }
            }
            slot[0].push(k);
            slot[1].push(ek);
            slot[2].push(eu);
            slot[3].push(eku);
        }
        for c in touched.drain(..) {
            let ci = c as usize;
            not_k[ci] = 0;
            not_u[ci] = 0;
            not_ku[ci] = 0;
        }
    }

    let vertices = acc
        .into_iter()
        .enumerate()
        .map(|(v, [k, e_k, e_u, e_ku])| {
            let ell = cover.list(v).len();
            let avg = if ell > 0 {
                degree_sum(cover, cover.list(v)) as f64 / ell as f64
            } else {
                0.0
            };
            let base = derived.keep * derived.keep * ell as f64 * avg;
            VertexEstimate {
                vertex: v as VertexId,
                ell,
                avg_degree: avg,
                k,
                expected_k: derived.keep * ell as f64,
                e_k,
                reference_e_k: base,
                e_u,
                e_ku,
                reference_e_ku: base * derived.uncolor,
            }
        })
        .collect();
    Ok(StatsReport {
        trials,
        derived,
        vertices,
    })
}
