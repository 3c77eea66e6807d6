//! The deterministic parameter recursion that drives successive rounds.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::nibble::RoundDerived;

pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRow {
    /// 1-based row index.
    pub i: usize,
    pub ell: f64,
    pub d: f64,
    pub eps: f64,
    pub keep: f64,
    pub uncolor: f64,
    /// `d / ell`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub d: f64,
    pub eps: f64,
    pub t: usize,
    pub kappa: f64,
    pub eta: f64,
    pub rows: Vec<ScheduleRow>,
    /// First row index with `d_i <= ell_i / 100`; `None` for a truncated schedule.
    pub i_star: Option<usize>,
}

/// `(2 + eps/4) log(1 + eps/50)`
pub fn kappa(eps: f64) -> f64 {
    (2.0 + eps / 4.0) * (eps / 50.0).ln_1p()
}

/// `(10/kappa) log d log log d`
pub fn i_star_bound(d: f64, kappa: f64) -> f64 {
    10.0 / kappa * d.ln() * d.ln().ln()
}

#[inline]
fn stopped(row: &ScheduleRow) -> bool {
    row.d <= row.ell / 100.0
}

fn make_row(i: usize, ell: f64, d: f64, eps: f64, eta: f64) -> Result<ScheduleRow> {
    let r = RoundDerived::compute(d, ell, eta).map_err(|_| {
        Error::Parameter(format!(
            "eta/ell_{i} = {} is not below 1; d is too small for the recursion",
            g12(eta / ell)
        ))
    })?;
    Ok(ScheduleRow {
        i,
        ell,
        d,
        eps,
        keep: r.keep,
        uncolor: r.uncolor,
        ratio: d / ell,
    })
}

/// Runs the recursion from `ell_1 = (4+eps) d / log d`, `d_1 = d`, `eps_1 = 0` until
/// `d_i <= ell_i / 100`, producing at most `max_iter` rows.
pub fn build_schedule(d: f64, eps: f64, t: usize, max_iter: usize) -> Result<Schedule> {
    if !(d.is_finite() && d > 1.0) {
        return Err(Error::Parameter(format!("d = {d} must be a finite number above 1")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    if t == 0 {
        return Err(Error::Parameter("t must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::Parameter("max_iter must be positive".into()));
    }
    let log_d = d.ln();
    let ell1 = (4.0 + eps) * d / log_d;
    if ell1 < 1.0 {
        return Err(Error::Parameter(format!("ell_1 = {} is below 1", g12(ell1))));
    }
    let kappa = kappa(eps);
    let eta = kappa / log_d;
    let exponent = -1.0 / (200.0 * t as f64);

    let mut rows = Vec::new();
    let mut row = make_row(1, ell1, d, 0.0, eta)?;
    loop {
        rows.push(row);
        if stopped(&row) {
            let i_star = row.i;
            return Ok(Schedule {
                d,
                eps,
                t,
                kappa,
                eta,
                rows,
                i_star: Some(i_star),
            });
        }
        if rows.len() >= max_iter {
            return Err(Error::ScheduleDivergence {
                rows: rows.len(),
                last: row,
            });
        }
        let ell = row.keep * row.ell;
        let dn = row.keep * row.uncolor * row.d;
        let epsn = (1.0 + 3.0 * eta) * row.eps + row.d.powf(exponent);
        row = make_row(row.i + 1, ell, dn, epsn, eta)?;
    }
}

impl Schedule {
    pub fn row(&self, i: usize) -> Option<&ScheduleRow> {
        self.rows.get(i.checked_sub(1)?)
    }

    pub fn i_star_row(&self) -> Option<&ScheduleRow> {
        self.row(self.i_star?)
    }

    /// Rows plus a footer carrying `iStar`, `kappa` and `eta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,ell_i,d_i,eps_i,keep_i,uncolor_i,ratio_i\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.i,
                g12(r.ell),
                g12(r.d),
                g12(r.eps),
                g12(r.keep),
                g12(r.uncolor),
                g12(r.ratio)
            );
        }
        let i_star = self.i_star.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(out, "iStar={i_star},kappa={},eta={}", g12(self.kappa), g12(self.eta));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantViolation {
    /// I1: `d_{i+1}/ell_{i+1} > d_i/ell_i`.
    RatioIncreased { i: usize, before: f64, after: f64 },
    /// I2: `ell_i < d^(a eps)` for some `i <= iStar`.
    ListFloor { i: usize, ell: f64, floor: f64 },
    /// I3: the stop never fired.
    StopNotReached { rows: usize },
    /// I3: the stop fired later than `(10/kappa) log d log log d`.
    StopTooLate { i_star: usize, bound: f64 },
    /// `eps_{iStar} > 1 / log d`.
    FinalEps { eps: f64, bound: f64 },
    /// `ell_{iStar} (1 - 1/log d) / 2 < 10 d_{iStar}`.
    FinalSlack { lhs: f64, rhs: f64 },
}

impl InvariantViolation {
    /// True for the clauses that hold at every representable `d`: I1, the I3 bound and
    /// the closing slack. The others are asymptotic.
    pub fn is_structural(&self) -> bool {
        !matches!(self, InvariantViolation::ListFloor { .. } | InvariantViolation::FinalEps { .. })
    }
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use InvariantViolation::*;
        match self {
            RatioIncreased { i, before, after } => write!(
                f,
                "I1: ratio rose from {} at row {i} to {} at row {}",
                g12(*before),
                g12(*after),
                i + 1
            ),
            ListFloor { i, ell, floor } => write!(
                f,
                "I2: ell_{i} = {} is below d^(a*eps) = {} (first offending row)",
                g12(*ell),
                g12(*floor)
            ),
            StopNotReached { rows } => write!(f, "I3: no stop within {rows} rows"),
            StopTooLate { i_star, bound } => {
                write!(f, "I3: iStar = {i_star} exceeds the bound {}", g12(*bound))
            }
            FinalEps { eps, bound } => write!(
                f,
                "final drift eps_iStar = {} exceeds 1/log d = {}",
                g12(*eps),
                g12(*bound)
            ),
            FinalSlack { lhs, rhs } => write!(
                f,
                "final slack ell(1-1/log d)/2 = {} is below 10 d = {}",
                g12(*lhs),
                g12(*rhs)
            ),
        }
    }
}

/// Checks I1–I3 and the two closing inequalities. Returns every violation found
/// (at most one per clause, except I1 which lists each offending pair).
pub fn verify_schedule_invariants(s: &Schedule, a: f64) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    for w in s.rows.windows(2) {
        if w[1].ratio > w[0].ratio {
            out.push(InvariantViolation::RatioIncreased {
                i: w[0].i,
                before: w[0].ratio,
                after: w[1].ratio,
            });
        }
    }
    let Some(star) = s.i_star_row() else {
        out.push(InvariantViolation::StopNotReached { rows: s.rows.len() });
        return out;
    };
    let floor = s.d.powf(a * s.eps);
    if let Some(r) = s.rows[..star.i].iter().find(|r| r.ell < floor) {
        out.push(InvariantViolation::ListFloor {
            i: r.i,
            ell: r.ell,
            floor,
        });
    }
    let bound = i_star_bound(s.d, s.kappa);
    if star.i as f64 > bound {
        out.push(InvariantViolation::StopTooLate { i_star: star.i, bound });
    }
    let inv_log = 1.0 / s.d.ln();
    if star.eps > inv_log {
        out.push(InvariantViolation::FinalEps {
            eps: star.eps,
            bound: inv_log,
        });
    }
    let lhs = star.ell * (1.0 - inv_log) / 2.0;
    let rhs = 10.0 * star.d;
    if lhs < rhs {
        out.push(InvariantViolation::FinalSlack { lhs, rhs });
    }
    out
}
