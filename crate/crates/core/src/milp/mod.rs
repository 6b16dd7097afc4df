//! Mixed-binary linear models, a branch-and-bound solver over a dense
//! bounded simplex, and big-M encodings of STL robustness.

mod bnb;
mod encode;
mod lp_format;
mod model;
mod simplex;

use thiserror::Error;

use crate::stl::StlError;

pub use bnb::{is_feasible, solve, solve_with_start, MilpSolution, SolveStatus, SolverConfig};
pub use encode::{
    encode_max, encode_min, encode_robustness, Encoded, Polarity, RobustnessEncoder, SignalTable,
};
pub use lp_format::write_lp;
pub use model::{ConstrRef, Constraint, LinExpr, Model, Relation, Sense, VarInfo, VarKind, VarRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error("variable belongs to a different model")]
    ForeignVar,
    #[error("non-finite coefficient or right-hand side")]
    NonFinite,
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("model has no variables")]
    EmptyModel,
    #[error("min/max needs at least one operand")]
    EmptyOperands,
    #[error("{what}: required big-M {required} exceeds the configured {big_m}")]
    BigMExceeded { what: String, required: f64, big_m: f64 },
    #[error("robustness is a constant infinity")]
    InfiniteRobustness,
    #[error(transparent)]
    Stl(#[from] StlError),
}
