//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the solvers and the search pipeline.
#[derive(Error, Debug)]
pub enum Error {
    /// Shooting bisection could not bracket a decaying radial solution.
    #[error("no decaying bracket for dim={dim}, p={p}: {detail}")]
    NoDecayBracket { dim: usize, p: f64, detail: String },

    /// A computed quantity failed to meet its requested tolerance.
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    /// Fixed-point or eigenvalue iteration failed to converge.
    #[error("iteration diverged: {0}")]
    IterationDiverged(String),

    /// Mesh width too coarse for the spike scale.
    #[error("mesh too coarse: h = {h} exceeds 1/4 (rescaled units)")]
    MeshTooCoarse { h: f64 },

    /// A requested point lies outside the domain.
    #[error("point ({x}, {y}) outside domain")]
    PointOutsideDomain { x: f64, y: f64 },

    /// The bordered saddle system was numerically singular.
    #[error("saddle system singular: {0}")]
    SaddleSingular(String),

    /// The nonlinear fixed-point iteration stopped contracting.
    #[error("contraction failed after {iterations} iterations (last residual {residual:.3e})")]
    ContractionFailed { iterations: usize, residual: f64 },

    /// No feasible insertion point remains; the configuration is at the
    /// packing ceiling.
    #[error("no clearance: best feasible candidate {best:.6e} < required {required:.6e}")]
    NoClearance { best: f64, required: f64 },

    /// Newton polish diverged or hit the iteration cap.
    #[error("newton diverged: {0}")]
    NewtonDiverged(String),

    /// A spike configuration violates the admissibility constraints.
    #[error("infeasible configuration: {0}")]
    InfeasibleConfiguration(String),

    /// Linear solve failure outside the saddle path.
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
