use thiserror::Error;

use crate::nibble::ConditionViolation;
use crate::schedule::ScheduleRow;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad text input. `line` is 1-based when known.
    #[error("malformed input{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Malformed { line: Option<usize>, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("average color-degree undefined: vertex {vertex} has an empty list")]
    UndefinedAverage { vertex: usize },

    #[error("{what} gave up after {attempts} attempts{}", summarize(.violations))]
    RetryExhausted {
        what: &'static str,
        attempts: u64,
        violations: Vec<ConditionViolation>,
    },

    #[error("schedule did not reach its stop within {rows} rows (last row: {last:?})")]
    ScheduleDivergence { rows: usize, last: ScheduleRow },

    #[error("instance too large for exhaustive search (list-size product {product:e} exceeds {limit:e})")]
    InstanceTooLarge { product: f64, limit: f64 },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// Strips any `Stage` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

fn summarize(violations: &[ConditionViolation]) -> String {
    match violations.first() {
        None => String::new(),
        Some(first) => format!(
            " ({} violation(s), first: {first})",
            violations.len()
        ),
    }
}
