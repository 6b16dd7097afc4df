//! Signal temporal logic: formula syntax, parsing, and robustness monitoring
//! over uniformly sampled traces.
//!
//! Semantics are discrete. Temporal operators range over the sample indices
//! that fall inside the shifted interval, and the quantitative semantics use
//! exact `min`/`max` (no smoothing).

mod formula;
mod monitor;
mod parse;
mod trace;

use thiserror::Error;

pub use formula::{Formula, Interval, Predicate};
pub use monitor::{check_dims, interval_to_indices, predicate_value, robustness, satisfies};
pub use parse::parse_formula;
pub use trace::{TimeGrid, Trace, GRID_TOLERANCE};

pub(crate) use trace::same_grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("invalid interval [{a}, {b}]: need 0 <= a <= b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("non-finite coefficient in predicate")]
    NonFinite,
    #[error("unknown signal dimension `{0}`")]
    UnknownDimension(String),
    #[error("interval [{a}, {b}] at sample {t_index} lies beyond the trace horizon")]
    EmptyWindow { a: f64, b: f64, t_index: usize },
    #[error("sample index {index} outside trace of {steps} samples")]
    IndexOutOfRange { index: usize, steps: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("duplicate signal dimension `{0}`")]
    DuplicateDimension(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}
