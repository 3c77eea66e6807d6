//! Multi-round coloring: schedule-driven rounds followed by a finisher.
//!
//! Rounds run on a [`RoundEngine`], which keeps the residual cover implicitly (alive flags
//! and degree counters over the original ids) instead of materializing a restricted cover
//! per round. It draws the same coins and makes the same decisions as
//! [`nibble::run_round_until_good_with`](crate::nibble::run_round_until_good_with) applied to
//! the materialized residual, so both routes produce identical colorings.

use crate::coloring::PartialColoring;
use crate::cover::{ColorId, DPCover, Restriction};
use crate::error::{Error, Result};
use crate::finisher::{self, FinishMethod};
use crate::fmt::g12;
use crate::graph::VertexId;
use crate::nibble::{
    attempt_seed, Clause, ConditionBounds, ConditionViolation, EqualizerTable, RoundCoins, RoundParams, TOL,
};
use crate::rng::{derive_seed, stream};
use crate::schedule::{build_schedule, Schedule, DEFAULT_MAX_ITER};

/// What one committed round did.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub round: usize,
    /// Vertices colored in this round.
    pub colored: usize,
    /// Vertices still uncolored afterwards.
    pub uncolored: usize,
    pub attempts: u64,
    pub seed: u64,
    /// Largest residual color degree afterwards.
    pub residual_max_degree: usize,
    pub min_list: usize,
    pub max_list: usize,
    /// List-window and average-degree hypotheses that failed on the round's input.
    pub warnings: usize,
}

/// The residual cover of a sequence of rounds, kept over the ids of the starting cover.
#[derive(Debug, Clone)]
pub struct RoundEngine<'a> {
    cover: &'a DPCover,
    alive: Vec<bool>,
    /// Number of alive cover-neighbors, meaningful for alive colors.
    deg: Vec<u32>,
    lists: Vec<Vec<ColorId>>,
    deg_sum: Vec<u64>,
    /// Uncolored vertices, ascending.
    uncolored: Vec<VertexId>,
    phi: PartialColoring,
    /// Alive colors by degree.
    hist: Vec<usize>,
    scratch: Scratch,
}

#[derive(Debug, Clone)]
struct Scratch {
    kept: Vec<bool>,
    activated: Vec<bool>,
    removed: Vec<bool>,
    /// Removed-neighbor counts of alive colors.
    lost: Vec<u32>,
    /// Bad (not kept, or owner colored) neighbor counts.
    bad: Vec<u32>,
    colored_now: Vec<bool>,
    vertex_mark: Vec<bool>,
    act_list: Vec<ColorId>,
    removed_list: Vec<ColorId>,
    touched: Vec<ColorId>,
    newly: Vec<(VertexId, ColorId)>,
    affected: Vec<VertexId>,
}

impl<'a> RoundEngine<'a> {
    /// Starts from the full cover with nothing colored.
    pub fn new(cover: &'a DPCover) -> RoundEngine<'a> {
        let m = cover.color_count();
        let n = cover.vertex_count();
        let deg: Vec<u32> = (0..m as ColorId).map(|c| cover.cover_degree(c) as u32).collect();
        let mut hist = vec![0usize; cover.max_cover_degree() + 1];
        for list in cover.lists() {
            for &c in list {
                hist[deg[c as usize] as usize] += 1;
            }
        }
        let deg_sum = cover
            .lists()
            .iter()
            .map(|l| l.iter().map(|&c| deg[c as usize] as u64).sum())
            .collect();
        RoundEngine {
            cover,
            alive: vec![true; m],
            deg,
            lists: cover.lists().to_vec(),
            deg_sum,
            uncolored: (0..n as VertexId).collect(),
            phi: PartialColoring::empty(n),
            hist,
            scratch: Scratch {
                kept: vec![false; m],
                activated: vec![false; m],
                removed: vec![false; m],
                lost: vec![0; m],
                bad: vec![0; m],
                colored_now: vec![false; n],
                vertex_mark: vec![false; n],
                act_list: Vec::new(),
                removed_list: Vec::new(),
                touched: Vec::new(),
                newly: Vec::new(),
                affected: Vec::new(),
            },
        }
    }

    pub fn coloring(&self) -> &PartialColoring {
        &self.phi
    }

    pub fn uncolored(&self) -> &[VertexId] {
        &self.uncolored
    }

    /// Current list of an uncolored vertex (empty for colored ones).
    pub fn list(&self, v: usize) -> &[ColorId] {
        &self.lists[v]
    }

    pub fn max_degree(&self) -> usize {
        self.hist.iter().rposition(|&x| x > 0).unwrap_or(0)
    }

    pub fn min_list(&self) -> usize {
        self.uncolored
            .iter()
            .map(|&v| self.lists[v as usize].len())
            .min()
            .unwrap_or(0)
    }

    pub fn max_list(&self) -> usize {
        self.uncolored
            .iter()
            .map(|&v| self.lists[v as usize].len())
            .max()
            .unwrap_or(0)
    }

    /// Every uncolored vertex has at least `8 * (residual max degree)` colors left.
    pub fn lists_dominate(&self) -> bool {
        self.min_list() >= 8 * self.max_degree()
    }

    /// The residual as a restriction of the starting cover.
    pub fn residual(&self) -> Result<Restriction> {
        let keep: Vec<Vec<ColorId>> = self
            .uncolored
            .iter()
            .map(|&v| self.lists[v as usize].clone())
            .collect();
        self.cover.restrict(&self.uncolored, &keep)
    }

    fn count_warnings(&self, p: &RoundParams) -> usize {
        let low = (1.0 - p.eps) * p.ell / 2.0;
        let high = (1.0 + p.eps) * p.ell;
        let mut count = 0;
        for &v in &self.uncolored {
            let len = self.lists[v as usize].len();
            if (len as f64) < low - TOL || len as f64 > high + TOL {
                count += 1;
            }
            if len > 0 {
                let avg = self.deg_sum[v as usize] as f64 / len as f64;
                let bound = (2.0 - (1.0 - p.eps) * p.ell / len as f64) * p.d;
                if avg > bound + TOL {
                    count += 1;
                }
            }
        }
        count
    }

    /// One round, retried with attempt seeds until the residual passes the conditions.
    /// On failure the engine is left unchanged.
    pub fn step(&mut self, round: usize, p: &RoundParams, max_attempts: u64) -> Result<RoundSummary> {
        if max_attempts == 0 {
            return Err(Error::Parameter("max_attempts must be positive".into()));
        }
        let derived = p.derived()?;
        let max_deg = self.max_degree();
        if max_deg as f64 > 2.0 * p.d + TOL {
            return Err(Error::Contract(format!(
                "maximum color degree {max_deg} exceeds 2d = {}",
                g12(2.0 * p.d)
            )));
        }
        let warnings = self.count_warnings(p);
        let table = EqualizerTable::new(p, max_deg);
        let bounds = p.bounds(&derived);
        let mut last = Vec::new();
        for attempt in 0..max_attempts {
            let trial = p.with_seed(attempt_seed(p.seed, attempt));
            let violations = self.sample(&trial, &table, 2.0 * derived.d_prime, &bounds);
            if violations.is_empty() {
                let colored = self.commit();
                if self.max_degree() as f64 > bounds.degree_cap() + TOL {
                    return Err(Error::Internal("residual color degree above the cap".into()));
                }
                return Ok(RoundSummary {
                    round,
                    colored,
                    uncolored: self.uncolored.len(),
                    attempts: attempt + 1,
                    seed: trial.seed,
                    residual_max_degree: self.max_degree(),
                    min_list: self.min_list(),
                    max_list: self.max_list(),
                    warnings,
                });
            }
            self.discard();
            last = violations;
        }
        Err(Error::RetryExhausted {
            what: "nibble round",
            attempts: max_attempts,
            violations: last,
        })
    }

    /// Draws one execution into the scratch state and returns the condition violations of
    /// the resulting residual.
    fn sample(
        &mut self,
        p: &RoundParams,
        table: &EqualizerTable,
        cap: f64,
        bounds: &ConditionBounds,
    ) -> Vec<ConditionViolation> {
        let cover = self.cover;
        let coins = RoundCoins::new(p);
        let max_deg = self.max_degree();
        let s = &mut self.scratch;

        for &v in &self.uncolored {
            for &c in &self.lists[v as usize] {
                let key = cover.color_origin(c);
                let ci = c as usize;
                if coins.activated(key) {
                    s.activated[ci] = true;
                    s.act_list.push(c);
                }
                s.kept[ci] = coins.equalized(key, table.get(self.deg[ci] as usize));
            }
        }
        for &a in &s.act_list {
            for &x in cover.cover_neighbors(a) {
                if self.alive[x as usize] {
                    s.kept[x as usize] = false;
                }
            }
        }
        for &a in &s.act_list {
            let v = cover.owner_unchecked(a);
            if s.colored_now[v] {
                continue;
            }
            if let Some(&c) = self.lists[v]
                .iter()
                .find(|&&c| s.activated[c as usize] && s.kept[c as usize])
            {
                s.colored_now[v] = true;
                s.newly.push((v as VertexId, c));
            }
        }

        // bad colors: alive and not kept, or owned by a vertex colored now
        for &v in &self.uncolored {
            let colored = s.colored_now[v as usize];
            for &c in &self.lists[v as usize] {
                if colored || !s.kept[c as usize] {
                    s.removed[c as usize] = true;
                    s.removed_list.push(c);
                }
            }
        }
        for &x in &s.removed_list {
            for &c in cover.cover_neighbors(x) {
                let ci = c as usize;
                if self.alive[ci] {
                    if s.bad[ci] == 0 && s.lost[ci] == 0 {
                        s.touched.push(c);
                    }
                    s.bad[ci] += 1;
                    s.lost[ci] += 1;
                }
            }
        }
        // kept colors of uncolored vertices with too many kept uncolored neighbors
        if max_deg as f64 > cap {
            let bad_len = s.removed_list.len();
            for &v in &self.uncolored {
                if s.colored_now[v as usize] {
                    continue;
                }
                for &c in &self.lists[v as usize] {
                    let ci = c as usize;
                    if !s.removed[ci] && (self.deg[ci] - s.bad[ci]) as f64 > cap {
                        s.removed[ci] = true;
                        s.removed_list.push(c);
                    }
                }
            }
            for i in bad_len..s.removed_list.len() {
                let x = s.removed_list[i];
                for &c in cover.cover_neighbors(x) {
                    let ci = c as usize;
                    if self.alive[ci] {
                        if s.bad[ci] == 0 && s.lost[ci] == 0 {
                            s.touched.push(c);
                        }
                        s.lost[ci] += 1;
                    }
                }
            }
        }

        // conditions on the would-be residual, in ascending vertex order
        for &c in s.removed_list.iter().chain(&s.touched) {
            let v = cover.owner_unchecked(c);
            if !s.vertex_mark[v] {
                s.vertex_mark[v] = true;
                s.affected.push(v as VertexId);
            }
        }
        let mut violations = Vec::new();
        for &v in &self.uncolored {
            let vi = v as usize;
            if s.colored_now[vi] {
                continue;
            }
            let (len, sum) = if s.vertex_mark[vi] {
                let mut len = 0usize;
                let mut sum = 0u64;
                for &c in &self.lists[vi] {
                    let ci = c as usize;
                    if !s.removed[ci] {
                        len += 1;
                        sum += (self.deg[ci] - s.lost[ci]) as u64;
                    }
                }
                (len, sum)
            } else {
                (self.lists[vi].len(), self.deg_sum[vi])
            };
            bounds.evaluate(len, sum, 0, true, |clause: Clause, value, bound| {
                violations.push(ConditionViolation {
                    vertex: v,
                    clause,
                    value,
                    bound,
                })
            });
        }
        violations
    }

    /// Applies the sampled execution; returns the number of vertices colored.
    fn commit(&mut self) -> usize {
        let s = &mut self.scratch;
        for &c in &s.removed_list {
            let ci = c as usize;
            self.alive[ci] = false;
            self.hist[self.deg[ci] as usize] -= 1;
        }
        for &c in &s.touched {
            let ci = c as usize;
            if self.alive[ci] && s.lost[ci] > 0 {
                self.hist[self.deg[ci] as usize] -= 1;
                self.deg[ci] -= s.lost[ci];
                self.hist[self.deg[ci] as usize] += 1;
            }
        }
        for &(v, c) in &s.newly {
            self.phi.set(v as usize, c);
        }
        for &v in &s.affected {
            let vi = v as usize;
            if s.colored_now[vi] {
                self.lists[vi].clear();
                self.deg_sum[vi] = 0;
            } else {
                let alive = &self.alive;
                self.lists[vi].retain(|&c| alive[c as usize]);
                self.deg_sum[vi] = self.lists[vi].iter().map(|&c| self.deg[c as usize] as u64).sum();
            }
        }
        let colored_now = &s.colored_now;
        self.uncolored.retain(|&v| !colored_now[v as usize]);
        let colored = s.newly.len();
        self.discard();
        colored
    }

    fn discard(&mut self) {
        let s = &mut self.scratch;
        for &c in &s.act_list {
            s.activated[c as usize] = false;
        }
        for &c in &s.removed_list {
            s.removed[c as usize] = false;
        }
        for &c in &s.touched {
            s.bad[c as usize] = 0;
            s.lost[c as usize] = 0;
        }
        for &(v, _) in &s.newly {
            s.colored_now[v as usize] = false;
        }
        for &v in &s.affected {
            s.vertex_mark[v as usize] = false;
        }
        s.act_list.clear();
        s.removed_list.clear();
        s.touched.clear();
        s.newly.clear();
        s.affected.clear();
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Total coloring of the input cover.
    pub coloring: PartialColoring,
    pub rounds_used: usize,
    pub rounds: Vec<RoundSummary>,
    /// `None` when the lists dominated the degrees from the start.
    pub schedule: Option<Schedule>,
    pub finish_method: FinishMethod,
    pub resamples_used: u64,
    /// Properness on the input cover, checked after composition.
    pub verified: bool,
}

impl PipelineResult {
    pub fn per_round_attempts(&self) -> Vec<u64> {
        self.rounds.iter().map(|r| r.attempts).collect()
    }

    pub fn rounds_csv(&self) -> String {
        let mut out = String::from(
            "round,colored,uncolored,attempts,residual_max_degree,min_list,max_list,warnings\n",
        );
        for r in &self.rounds {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.round,
                r.colored,
                r.uncolored,
                r.attempts,
                r.residual_max_degree,
                r.min_list,
                r.max_list,
                r.warnings
            ));
        }
        out
    }
}

/// Seed of round `i` of a pipeline run.
pub fn round_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, stream::ROUND, i as u64)
}

/// Colors `cover` by running scheduled rounds until the lists dominate the degrees (or the
/// schedule's stop), then finishing the residual.
pub fn run_pipeline(
    cover: &DPCover,
    eps: f64,
    s: usize,
    t: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<PipelineResult> {
    if let Err(v) = cover.validate() {
        return Err(Error::Contract(format!("input is not a DP-cover: {v}")));
    }
    let mut engine = RoundEngine::new(cover);
    let mut rounds = Vec::new();
    let mut schedule = None;

    if !engine.lists_dominate() {
        let d = cover.max_cover_degree() as f64;
        let sched = build_schedule(d, eps, t, DEFAULT_MAX_ITER)?;
        let ell1 = sched.rows[0].ell;
        let short = engine.min_list();
        if (short as f64) < ell1 - TOL {
            return Err(Error::Contract(format!(
                "shortest list has {short} colors; at least (4+eps)d/log d = {} are required",
                g12(ell1)
            )));
        }
        let last = sched.i_star.unwrap_or(sched.rows.len() + 1) - 1;
        for row in &sched.rows[..last] {
            if engine.lists_dominate() {
                break;
            }
            let p = RoundParams {
                d: row.d,
                ell: row.ell,
                eta: sched.eta,
                eps: row.eps,
                s,
                t,
                seed: round_seed(seed, row.i),
            };
            let summary = engine.step(row.i, &p, max_attempts).map_err(|e| Error::Stage {
                stage: row.i,
                source: Box::new(e),
            })?;
            rounds.push(summary);
        }
        schedule = Some(sched);
    }

    let stage = rounds.len() + 1;
    let wrap = |e: Error| match e {
        Error::Internal(_) => e,
        e => Error::Stage {
            stage,
            source: Box::new(e),
        },
    };
    let residual = engine.residual().map_err(wrap)?;
    let report = finisher::finish(&residual.cover, derive_seed(seed, stream::FINISH, 0)).map_err(wrap)?;

    let mut coloring = engine.coloring().clone();
    for (v, c) in report.coloring.assigned() {
        coloring.set(
            residual.vertex_map[v] as usize,
            residual.color_map[c as usize],
        );
    }
    let verified = coloring.is_total() && coloring.respects_lists(cover) && cover.is_proper(&coloring);
    if !verified {
        return Err(Error::Internal(
            "composed coloring fails verification on the input cover".into(),
        ));
    }
    Ok(PipelineResult {
        coloring,
        rounds_used: rounds.len(),
        rounds,
        schedule,
        finish_method: report.method,
        resamples_used: report.resamples_used,
        verified,
    })
}
