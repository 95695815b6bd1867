//! Error taxonomy shared across the crate.
//!
//! The split mirrors the CLI exit-code contract: configuration problems
//! (unknown ids, malformed files, invalid sweeps) are distinct from numeric
//! failures discovered while running a pipeline (infeasible geometry, solver
//! stalls, quadrature grids that fail their mass-coverage check).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the model's open domain `Θ₀`.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Invalid experiment configuration or unknown catalog id.
    #[error("config error: {0}")]
    Config(String),

    /// Cone/face construction failed (infeasible anchor, degenerate
    /// multipliers, nonpositive cone margin alpha, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An iterative solver exhausted its budget or violated its
    /// post-conditions.
    #[error("solver error: {0}")]
    Solver(String),

    /// Quadrature, normalization or sampling failure.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code the CLI maps this error to: 1 for configuration problems,
    /// 2 for numeric/geometry/solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
