//! Domain, problem, grid, and field abstractions shared by all solver
//! modules. Everything here is immutable after construction and safe to
//! share across worker threads.

mod config;
mod domain;
mod field;
mod problem;

pub use config::{make_problem, FieldConfig, ProblemConfig};
pub use domain::{signed_distance, Domain, Shape};
pub use field::{Provenance, ScalarField, VectorField};
pub use problem::{ExitTimeStrategy, ProblemSpec, TimeGrid};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown shape '{0}'")]
    UnknownShape(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter must be positive: {0}")]
    NonPositiveParameter(String),
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("invalid field definition: {0}")]
    InvalidField(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("analytic gradient disagrees with finite differences: {0}")]
    GradientMismatch(String),
}
