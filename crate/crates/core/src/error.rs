//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// S_{k-1} fell below the scale-aware positivity floor, or a curvature
    /// entry is negative beyond tolerance: Q_k and its derivatives are not
    /// defined there.
    #[error("non-admissible curvature vector for k={k}: S_{{k-1}}={s_km1:.3e} (floor {floor:.3e})")]
    NonAdmissible { k: usize, s_km1: f64, floor: f64 },

    /// A finite-difference stencil left the computational domain.
    #[error("stencil leaves the domain mask at node {node}")]
    BoundaryStencil { node: usize },

    /// Discrete convexity failed beyond tolerance.
    #[error("convexity lost at node {node}: min eigenvalue {min_eig:.3e} at t={t:.6}")]
    NonConvex { node: usize, min_eig: f64, t: f64 },

    /// No grid node lies below the cutoff level M.
    #[error("empty support: no node has psi > 0")]
    EmptySupport,

    /// Time step kept failing the post-step convexity check.
    #[error("step rejected at t={t:.6} after {attempts} halvings (last dt={dt:.3e}): {detail}")]
    StepRejected {
        t: f64,
        dt: f64,
        attempts: usize,
        detail: String,
    },

    /// Q_k is not strictly positive on the initial support of psi.
    #[error("inadmissible initial data: Q_k <= 0 on the support (node {node})")]
    InadmissibleInitialData { node: usize },

    /// A support state stopped being convex (some curvature radius < 0).
    #[error("support function lost convexity at node {node}: min radius {min_radius:.3e}")]
    ConvexityLost { node: usize, min_radius: f64 },

    /// The body collapsed.
    #[error("body extinct at t={t:.6}")]
    Extinct { t: f64 },

    /// Reflection level is not above the graph minimum.
    #[error("graph does not dip below the reflection level: min u = {min_u:.6} >= j = {level:.6}")]
    NotBelowLevel { min_u: f64, level: f64 },

    /// A construction stage failed.
    #[error("construction failed at stage `{stage}`: {source}")]
    ConstructionFailed {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// The nesting S_j <= S_{j+1} was violated along the construction.
    #[error("nesting violated between j={j_lo} and j={j_hi} at t={t:.6}: gap {gap:.3e}")]
    NestingViolation { j_lo: f64, j_hi: f64, t: f64, gap: f64 },

    /// An approximant died before the guaranteed existence time.
    #[error("approximant j={j} extinct at t={t:.6}, required t>={required:.6}")]
    EarlyExtinction { j: f64, t: f64, required: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
