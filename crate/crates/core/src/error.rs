//! Crate-wide error type.

use nalgebra::DVector;
use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An objective produced a non-finite value or gradient.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The argument lies outside the objective's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two atoms coincide or a matrix could not be factorized.
    #[error("singularity: {0}")]
    Singularity(String),

    /// An Euler step produced a non-finite coordinate.
    #[error("non-finite step result at coordinate {coord}")]
    Step { coord: usize },

    /// A Hessian eigenvalue fell below the degeneracy floor.
    #[error("degenerate critical point: |lambda| = {eigenvalue:e} below floor {floor:e}")]
    DegenerateCritical { eigenvalue: f64, floor: f64 },

    /// The point handed to a classifier is not a critical point.
    #[error("not a critical point: gradient norm {grad_norm:e} >= tol {tol:e}")]
    NotCritical { grad_norm: f64, tol: f64 },

    /// Iteration cap reached; carries the last iterate.
    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        last: DVector<f64>,
    },

    /// Levenberg-Marquardt could not produce a step.
    #[error("Levenberg-Marquardt stalled: {0}")]
    Stall(String),

    /// A refined saddle candidate had the wrong Morse index.
    #[error("wrong index: expected one negative eigenvalue, found {negative}")]
    WrongIndex { negative: usize },

    /// Integration from a supposed exit point converged to a minimum.
    #[error("fell into basin: integration converged to a stable point")]
    FellIntoBasin,

    /// The exit point or its perturbation is unusable.
    #[error("degenerate exit: {0}")]
    DegenerateExit(String),

    /// No exit point exists along the requested segment.
    #[error("no exit point found along the segment")]
    NoExitPoint,

    /// Direction generation is impossible with the chosen strategy.
    #[error("direction strategy error: {0}")]
    Strategy(String),

    /// Parameter invariants (simplex, positivity, shapes) are violated.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An EM component lost all responsibility mass.
    #[error("empty component {component} at iteration {iteration}")]
    EmptyComponent { component: usize, iteration: usize },

    /// Dimensions of inputs disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Invalid experiment or module configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Evaluation(_) => "evaluation",
            Self::Domain(_) => "domain",
            Self::Singularity(_) => "singularity",
            Self::Step { .. } => "step",
            Self::DegenerateCritical { .. } => "degenerate_critical",
            Self::NotCritical { .. } => "not_critical",
            Self::NoConvergence { .. } => "no_convergence",
            Self::Stall(_) => "stall",
            Self::WrongIndex { .. } => "wrong_index",
            Self::FellIntoBasin => "fell_into_basin",
            Self::DegenerateExit(_) => "degenerate_exit",
            Self::NoExitPoint => "no_exit_point",
            Self::Strategy(_) => "strategy",
            Self::InvalidParams(_) => "invalid_params",
            Self::EmptyComponent { .. } => "empty_component",
            Self::Dimension { .. } => "dimension",
            Self::Config(_) => "config",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
            Self::Csv(_) => "csv",
        }
    }
}
