//! Closed-form reference solutions and comparison harnesses.
//!
//! A round sphere of radius rho has Q_k = ((n-k+1)/k) / rho, so under the
//! flow the radius obeys rho rho' = -(n-k+1)/k and
//!
//! ```text
//! rho(t)^2 = R0^2 - 2 (n-k+1)/k * t,    extinction at  t = k R0^2 / (2 (n-k+1)).
//! ```
//!
//! Enclosed balls stay enclosed (comparison principle), which makes the
//! shrinking ball a barrier for every flow run here.

use crate::error::{Error, Result};
use crate::geometry::{GraphState, GridMode};

/// Clearance tolerance of the enclosure check, relative to the initial ball
/// radius. Absorbs O(spacing^2) interface error without masking crossings.
pub const ENCLOSURE_TOL: f64 = 1e-3;

/// A shrinking-ball solution of the flow, centered on the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSolution {
    /// Height of the center above the graph plane.
    pub center_height: f64,
    /// Initial radius.
    pub r0: f64,
    pub n: usize,
    pub k: usize,
}

impl BallSolution {
    pub fn new(center_height: f64, r0: f64, n: usize, k: usize) -> Self {
        assert!(r0 > 0.0 && k >= 1 && k <= n);
        Self {
            center_height,
            r0,
            n,
            k,
        }
    }

    /// 2 (n-k+1) / k, the coefficient in rho^2 = R0^2 - coeff * t.
    pub fn law_coefficient(&self) -> f64 {
        2.0 * (self.n - self.k + 1) as f64 / self.k as f64
    }

    pub fn extinction_time(&self) -> f64 {
        self.k as f64 * self.r0 * self.r0 / (2.0 * (self.n - self.k + 1) as f64)
    }

    /// rho(t) = sqrt(R0^2 - 2 ((n-k+1)/k) t).
    pub fn radius(&self, t: f64) -> Result<f64> {
        if t >= self.extinction_time() {
            return Err(Error::Extinct { t });
        }
        Ok((self.r0 * self.r0 - self.law_coefficient() * t).sqrt())
    }
}

pub fn ball_radius(sol: &BallSolution, t: f64) -> Result<f64> {
    sol.radius(t)
}

/// Guaranteed existence time k R^2 / (2 (n-k+1)) for an inscribed radius R.
pub fn existence_time_lower_bound(r: f64, n: usize, k: usize) -> f64 {
    assert!(k >= 1 && k <= n && r > 0.0);
    k as f64 * r * r / (2.0 * (n - k + 1) as f64)
}

/// True iff every sampled boundary point of the ball lies on the epigraph
/// side of the graph, with vertical clearance >= -ENCLOSURE_TOL * R0.
/// The ball center sits on the symmetry axis (radial grids) or above the
/// grid center (full2d).
pub fn enclosure_check(graph: &GraphState, sol: &BallSolution, t: f64) -> Result<bool> {
    let rho = sol.radius(t)?;
    let clearance_floor = -ENCLOSURE_TOL * sol.r0;
    let samples = 720;
    match graph.mode {
        GridMode::Radial => {
            for s in 0..=samples {
                let alpha = std::f64::consts::PI * s as f64 / samples as f64;
                let r = rho * alpha.sin();
                let y = sol.center_height + rho * alpha.cos();
                let Some(u) = interp_radial(graph, r) else {
                    continue;
                };
                if y - u < clearance_floor {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        GridMode::Full2d => {
            // axisymmetric sampling in the (radius, height) half-plane, with
            // the graph evaluated along both grid axes
            for s in 0..=samples {
                let alpha = std::f64::consts::PI * s as f64 / samples as f64;
                let r = rho * alpha.sin();
                let y = sol.center_height + rho * alpha.cos();
                for dir in 0..2 {
                    let (x, yy) = if dir == 0 { (r, 0.0) } else { (0.0, r) };
                    let Some(u) = interp_full2d(graph, x, yy) else {
                        continue;
                    };
                    if y - u < clearance_floor {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn interp_radial(graph: &GraphState, r: f64) -> Option<f64> {
    if r < 0.0 {
        return None;
    }
    let x = r / graph.spacing;
    let i = x.floor() as usize;
    if i + 1 >= graph.nx {
        return None;
    }
    let w = x - i as f64;
    let a = graph.u[i];
    let b = graph.u[i + 1];
    if !(a.is_finite() && b.is_finite()) {
        return None;
    }
    Some(a + w * (b - a))
}

fn interp_full2d(graph: &GraphState, x: f64, y: f64) -> Option<f64> {
    let half = 0.5 * (graph.nx - 1) as f64 * graph.spacing;
    let fx = (x + half) / graph.spacing;
    let fy = (y + half) / graph.spacing;
    if fx < 0.0 || fy < 0.0 {
        return None;
    }
    let (i, j) = (fx.floor() as usize, fy.floor() as usize);
    if i + 1 >= graph.nx || j + 1 >= graph.ny {
        return None;
    }
    let (wx, wy) = (fx - i as f64, fy - j as f64);
    let at = |ii: usize, jj: usize| graph.u[jj * graph.nx + ii];
    let vals = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
    if vals.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(
        vals[0] * (1.0 - wx) * (1.0 - wy)
            + vals[1] * wx * (1.0 - wy)
            + vals[2] * (1.0 - wx) * wy
            + vals[3] * wx * wy,
    )
}
