//! Numerical laboratory for the Q_k curvature flow of convex hypersurfaces.
//!
//! The flow moves a hypersurface with normal speed `Q_k = S_k / S_{k-1}`,
//! the ratio of consecutive elementary symmetric polynomials of the
//! principal curvatures. `k = 1` is mean curvature flow; `k = 2` in R^3 is
//! harmonic mean curvature flow. The crate evolves convex graphs and closed
//! convex bodies by this speed and checks the quantitative a priori bounds
//! (gradient, speed and curvature estimates) along every run.
//!
//! Module map:
//! - [`symfun`]: symmetric-function algebra of principal curvatures,
//!   derivatives of `Q_k`, sharp parabolicity inequalities.
//! - [`geometry`]: discrete frames of graph hypersurfaces and the global
//!   monitor scan.
//! - [`flow`]: explicit time stepping of the graph flow with CFL control.
//! - [`supportfn`]: closed convex bodies via support functions on sphere
//!   grids; envelopes, mollification, reflection closure, support-side flow.
//! - [`oracle`]: shrinking-ball reference solutions and enclosure checks.
//! - [`monitors`]: per-run estimate verdicts.
//! - [`pipeline`]: the approximation-by-closed-hypersurfaces construction.
//! - [`config`], [`snapshot`], [`verify`]: experiment plumbing.

pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod monitors;
pub mod oracle;
pub mod pipeline;
pub mod snapshot;
pub mod supportfn;
pub mod symfun;
pub mod util;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{GraphState, GridMode, InitialData, PointFrame, ScanRecord};
pub use monitors::{MonitorRow, MonitorSeries, Verdict};
pub use oracle::BallSolution;
pub use supportfn::{Mollifier, SphereGrid, SupportState};
pub use symfun::{CurvatureVector, SymmetricFunctionReport};
