//! Closed convex hypersurfaces via support functions on sphere grids.
//!
//! A convex body with the origin in its interior is encoded by its support
//! function S(v) = max_{Y in body} <v, Y> on the unit sphere. The principal
//! curvature radii are the eigenvalues of `grad grad S + S g` on the sphere;
//! convexity is their non-negativity. Two grids are supported:
//!
//! - `Circle`: S^1, theta in [0, 2pi), for curves in R^2; the single radius
//!   is `rho = S_theta_theta + S`.
//! - `AxisymmetricSphere`: the polar profile phi in [0, pi] of a rotationally
//!   symmetric S on S^2, with radii `r1 = S_phiphi + S` (meridional) and
//!   `r2 = S_phi cot(phi) + S` (azimuthal, pole limit r2 -> r1).
//!
//! Angles are measured from the vertical axis, so the vertical component of
//! a direction is cos(angle) on both grids.
//!
//! The module provides the building blocks of the closure construction:
//! outward offset (eta-envelope, algebraically S + eta), spherical
//! convolution against a compactly supported zonal mollifier, reflection of
//! a graph across a horizontal level into a closed symmetric body, the
//! arctan convexity perturbation, and a support-function form of the flow,
//! S_t = -Q_k(1/radii).

use crate::error::{Error, Result};
use crate::flow::StepControl;
use crate::geometry::{GraphState, GridMode, ScanRecord};
use crate::symfun::{self, CurvatureVector};

use std::f64::consts::PI;

/// Relative tolerance below which a curvature radius counts as negative.
const RADIUS_TOL: f64 = 1e-9;

/// Samples stored in the mollifier profile record.
const PROFILE_SAMPLES: usize = 1025;

/// Nodes of the normalization quadrature.
const QUAD_NODES: usize = 4096;

/// Azimuth quadrature nodes for the zonal convolution on S^2.
const AZIMUTH_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereGrid {
    Circle,
    AxisymmetricSphere,
}

/// A closed convex hypersurface, sampled support values on a sphere grid.
#[derive(Debug, Clone)]
pub struct SupportState {
    pub grid: SphereGrid,
    /// Circle: values at theta_i = 2 pi i / len (periodic).
    /// Axisymmetric sphere: values at phi_i = pi i / (len - 1), inclusive.
    pub s: Vec<f64>,
    /// Hypersurface dimension: 1 on the circle, 2 on the sphere.
    pub n: usize,
    /// The support function is taken about (0, ..., 0, origin_height).
    pub origin_height: f64,
    pub t: f64,
}

impl SupportState {
    pub fn new(grid: SphereGrid, s: Vec<f64>, origin_height: f64) -> Self {
        let n = match grid {
            SphereGrid::Circle => 1,
            SphereGrid::AxisymmetricSphere => 2,
        };
        assert!(s.len() >= 16);
        Self {
            grid,
            s,
            n,
            origin_height,
            t: 0.0,
        }
    }

    /// Round body of the given radius about its center.
    pub fn ball(grid: SphereGrid, radius: f64, origin_height: f64, nodes: usize) -> Self {
        Self::new(grid, vec![radius; nodes], origin_height)
    }

    pub fn num_nodes(&self) -> usize {
        self.s.len()
    }

    /// Angle of node i, measured from the vertical axis.
    pub fn angle(&self, i: usize) -> f64 {
        match self.grid {
            SphereGrid::Circle => 2.0 * PI * i as f64 / self.s.len() as f64,
            SphereGrid::AxisymmetricSphere => PI * i as f64 / (self.s.len() - 1) as f64,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.grid {
            SphereGrid::Circle => 2.0 * PI / self.s.len() as f64,
            SphereGrid::AxisymmetricSphere => PI / (self.s.len() - 1) as f64,
        }
    }

    /// First derivative of S at node i (central differences; cyclic on the
    /// circle, even extension at the sphere poles).
    pub fn s_angle(&self, i: usize) -> f64 {
        let len = self.s.len();
        let d = self.spacing();
        match self.grid {
            SphereGrid::Circle => {
                let prev = self.s[(i + len - 1) % len];
                let next = self.s[(i + 1) % len];
                (next - prev) / (2.0 * d)
            }
            SphereGrid::AxisymmetricSphere => {
                let prev = if i == 0 { self.s[1] } else { self.s[i - 1] };
                let next = if i + 1 == len { self.s[len - 2] } else { self.s[i + 1] };
                (next - prev) / (2.0 * d)
            }
        }
    }

    fn s_angle_angle(&self, i: usize) -> f64 {
        let len = self.s.len();
        let d = self.spacing();
        match self.grid {
            SphereGrid::Circle => {
                let prev = self.s[(i + len - 1) % len];
                let next = self.s[(i + 1) % len];
                (next - 2.0 * self.s[i] + prev) / (d * d)
            }
            SphereGrid::AxisymmetricSphere => {
                let prev = if i == 0 { self.s[1] } else { self.s[i - 1] };
                let next = if i + 1 == len { self.s[len - 2] } else { self.s[i + 1] };
                (next - 2.0 * self.s[i] + prev) / (d * d)
            }
        }
    }

    /// Support value about the coordinate origin (recentered from the body's
    /// own origin), for comparisons across bodies.
    pub fn support_about_zero(&self, i: usize) -> f64 {
        self.s[i] + self.origin_height * self.angle(i).cos()
    }

    /// Boundary contact point (horizontal distance from axis, absolute
    /// height) for the direction of node i.
    pub fn boundary_point(&self, i: usize) -> (f64, f64) {
        let a = self.angle(i);
        let s = self.s[i];
        let sp = self.s_angle(i);
        let rho = s * a.sin() + sp * a.cos();
        let y = s * a.cos() - sp * a.sin() + self.origin_height;
        (rho, y)
    }
}

/// Principal curvature radii at every node (circle duplicates its single
/// radius). May return negative entries for invalid data; used by the
/// convexity checker.
pub fn curvature_radii(state: &SupportState) -> Vec<[f64; 2]> {
    let len = state.s.len();
    (0..len)
        .map(|i| {
            let r1 = state.s_angle_angle(i) + state.s[i];
            match state.grid {
                SphereGrid::Circle => [r1, r1],
                SphereGrid::AxisymmetricSphere => {
                    if i == 0 || i + 1 == len {
                        // removable singularity of cot(phi): r2 -> S_phiphi + S
                        [r1, r1]
                    } else {
                        let phi = state.angle(i);
                        let r2 = state.s_angle(i) * phi.cos() / phi.sin() + state.s[i];
                        [r1, r2]
                    }
                }
            }
        })
        .collect()
}

pub fn min_radius(state: &SupportState) -> f64 {
    curvature_radii(state)
        .iter()
        .flat_map(|r| r.iter().cloned())
        .fold(f64::INFINITY, f64::min)
}

/// Outward offset at distance eta: S + eta pointwise. Exact for convex
/// bodies; every curvature radius grows by exactly eta.
pub fn eta_envelope(state: &SupportState, eta: f64) -> SupportState {
    let mut out = state.clone();
    for v in &mut out.s {
        *v += eta;
    }
    out
}

/// Zonal mollifier phi_eps(v, w) = eta_eps(<v, w>), the standard bump
/// supported on <v, w> > 1 - eps, normalized to unit integral over the
/// sphere it is used on.
#[derive(Debug, Clone)]
pub struct Mollifier {
    pub epsilon: f64,
    /// Sphere dimension the normalization refers to (1 or 2).
    pub n: usize,
    /// Normalized profile sampled on a uniform grid of [-1, 1].
    pub profile: Vec<f64>,
    /// Multiplier making the spherical integral one.
    pub normalization: f64,
}

fn bump(r: f64, eps: f64) -> f64 {
    if r <= 1.0 - eps {
        return 0.0;
    }
    let z = (1.0 - r) / eps; // in [0, 1)
    let d = 1.0 - z * z;
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

/// Simpson quadrature on [a, b] with an even number of panels.
fn simpson(a: f64, b: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let m = if nodes % 2 == 0 { nodes } else { nodes + 1 };
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

impl Mollifier {
    pub fn new(epsilon: f64, n: usize) -> Self {
        assert!(epsilon > 0.0 && epsilon < 1.0);
        assert!(n == 1 || n == 2);
        let integral = match n {
            1 => {
                // int_{S^1} eta(cos alpha) d alpha, supported on |alpha| < w
                let w = (1.0 - epsilon).acos();
                simpson(-w, w, QUAD_NODES, |a| bump(a.cos(), epsilon))
            }
            _ => {
                // 2 pi int_0^pi eta(cos phi) sin phi d phi = 2 pi eps int_0^1 bump(z) dz
                2.0 * PI
                    * epsilon
                    * simpson(0.0, 1.0, QUAD_NODES, |z| {
                        let d = 1.0 - z * z;
                        if d <= 0.0 { 0.0 } else { (-1.0 / d).exp() }
                    })
            }
        };
        let normalization = 1.0 / integral;
        let profile = (0..PROFILE_SAMPLES)
            .map(|i| {
                let r = -1.0 + 2.0 * i as f64 / (PROFILE_SAMPLES - 1) as f64;
                normalization * bump(r, epsilon)
            })
            .collect();
        Self {
            epsilon,
            n,
            profile,
            normalization,
        }
    }

    /// Normalized kernel value at inner product r.
    pub fn eval(&self, r: f64) -> f64 {
        self.normalization * bump(r, self.epsilon)
    }

    /// Spherical integral recomputed with an independent quadrature; the
    /// deviation from one bounds the normalization error.
    pub fn integral_deviation(&self) -> f64 {
        let fine = 3 * QUAD_NODES + 1;
        let integral = match self.n {
            1 => {
                let w = (1.0 - self.epsilon).acos();
                simpson(-w, w, fine, |a| self.eval(a.cos()))
            }
            _ => simpson(0.0, PI, fine, |phi| {
                2.0 * PI * self.eval(phi.cos()) * phi.sin()
            }),
        };
        integral - 1.0
    }
}

/// Spherical convolution S * phi_eps by quadrature on the grid. The discrete
/// kernel rows are normalized to unit mass, so constants are reproduced
/// exactly. Errors with `ConvexityLost` when the result violates the radii
/// lower bound (the mollification scale was too coarse for the body).
pub fn mollify(state: &SupportState, m: &Mollifier) -> Result<SupportState> {
    let len = state.s.len();
    let d = state.spacing();
    let width = (1.0 - m.epsilon).acos();
    let mut out = state.clone();
    match state.grid {
        SphereGrid::Circle => {
            let band = (width / d).ceil() as usize + 1;
            let kernel: Vec<f64> = (0..=band)
                .map(|lag| m.eval((lag as f64 * d).cos()) * d)
                .collect();
            for i in 0..len {
                let mut acc = kernel[0] * state.s[i];
                let mut mass = kernel[0];
                for lag in 1..=band {
                    let w = kernel[lag];
                    if w == 0.0 {
                        continue;
                    }
                    acc += w * (state.s[(i + lag) % len] + state.s[(i + len - lag % len) % len]);
                    mass += 2.0 * w;
                }
                out.s[i] = acc / mass;
            }
        }
        SphereGrid::AxisymmetricSphere => {
            let band = (width / d).ceil() as usize + 1;
            // azimuth quadrature of the zonal kernel
            let beta_nodes = AZIMUTH_NODES;
            let dbeta = 2.0 * PI / beta_nodes as f64;
            for i in 0..len {
                let phi_i = state.angle(i);
                let (si, ci) = phi_i.sin_cos();
                let mut acc = 0.0;
                let mut mass = 0.0;
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(len - 1);
                for j in lo..=hi {
                    let phi_j = state.angle(j);
                    let (sj, cj) = phi_j.sin_cos();
                    let mut ker = 0.0;
                    for b in 0..beta_nodes {
                        let beta = b as f64 * dbeta;
                        ker += m.eval(ci * cj + si * sj * beta.cos());
                    }
                    ker *= dbeta;
                    let w = ker * sj * d;
                    acc += w * state.s[j];
                    mass += w;
                }
                if mass <= 0.0 {
                    // kernel narrower than the grid spacing
                    out.s[i] = state.s[i];
                } else {
                    out.s[i] = acc / mass;
                }
            }
        }
    }
    let scale = out.s.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let radii = curvature_radii(&out);
    for (node, r) in radii.iter().enumerate() {
        let rmin = r[0].min(r[1]);
        if rmin < -RADIUS_TOL * (1.0 + scale) {
            return Err(Error::ConvexityLost {
                node,
                min_radius: rmin,
            });
        }
    }
    Ok(out)
}

/// The strictly convex perturbation phi(r) = int_0^r arctan(s) ds, in closed
/// form r arctan r - log(1 + r^2)/2, added nodewise as phi(|x|)/j.
pub fn perturb_graph(graph: &GraphState, j: f64) -> GraphState {
    assert!(j > 0.0);
    let phi = |r: f64| r * r.atan() - 0.5 * (1.0 + r * r).ln();
    let mut out = graph.clone();
    match graph.mode {
        GridMode::Radial => {
            for i in 0..graph.nx {
                out.u[i] += phi(graph.node_r(i)) / j;
            }
        }
        GridMode::Full2d => {
            for jj in 0..graph.ny {
                for i in 0..graph.nx {
                    let (x, y) = graph.node_xy(i, jj);
                    out.u[jj * graph.nx + i] += phi(x.hypot(y)) / j;
                }
            }
        }
    }
    out
}

/// Default angular resolution of reflected bodies.
const DEFAULT_CLOSE_NODES: usize = 257;

/// Reflect the part of a radial graph below height `j` across the j-level
/// hyperplane, close it into a convex body, and offset outward by `eta`.
/// The support function is taken about the origin (0, j); the result is
/// symmetric under height reflection through that plane.
pub fn reflect_and_close(graph: &GraphState, j: f64, eta: f64) -> Result<SupportState> {
    reflect_and_close_with_grid(graph, j, eta, DEFAULT_CLOSE_NODES)
}

pub fn reflect_and_close_with_grid(
    graph: &GraphState,
    j: f64,
    eta: f64,
    nodes: usize,
) -> Result<SupportState> {
    if graph.mode != GridMode::Radial {
        return Err(Error::Config(
            "reflect_and_close expects a radial (axisymmetric or curve) graph".into(),
        ));
    }
    if !(graph.n == 1 || graph.n == 2) {
        return Err(Error::Config(
            "reflection closure is implemented for curves (n=1) and axisymmetric surfaces (n=2)"
                .into(),
        ));
    }
    let min_u = graph.min_height();
    if !(min_u < j) {
        return Err(Error::NotBelowLevel { min_u, level: j });
    }
    // boundary samples of the reflected body, heights relative to (0, j)
    let mut cloud: Vec<(f64, f64)> = Vec::new();
    for i in 0..graph.nx {
        let u = graph.u[i];
        if !u.is_finite() || u > j {
            continue;
        }
        let r = graph.node_r(i);
        cloud.push((r, u - j));
        cloud.push((r, j - u));
    }
    let grid = if graph.n == 1 {
        SphereGrid::Circle
    } else {
        SphereGrid::AxisymmetricSphere
    };
    let mut state = SupportState::new(grid, vec![0.0; nodes], j);
    for i in 0..nodes {
        let a = state.angle(i);
        let (sa, ca) = (a.sin().abs(), a.cos());
        let mut best = f64::NEG_INFINITY;
        for &(r, h) in &cloud {
            best = best.max(r * sa + h * ca);
        }
        state.s[i] = best + eta;
    }
    debug_assert!(state.s.iter().all(|v| *v > 0.0), "origin not enclosed");
    Ok(state)
}

/// Curvature vector of a support node from its radii.
fn node_lambda(state: &SupportState, radii: &[f64; 2]) -> CurvatureVector {
    match state.grid {
        SphereGrid::Circle => CurvatureVector::new(vec![1.0 / radii[0]]),
        SphereGrid::AxisymmetricSphere => {
            let mut v = vec![1.0 / radii[0], 1.0 / radii[1]];
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            CurvatureVector::new(v)
        }
    }
}

/// One forward-Euler step of the support-function flow S_t = -Q_k(1/radii).
/// The CFL budget uses the actual parabolic coefficient of the support
/// equation, max_i D_i Q_k * lambda_i^2.
pub fn step_support_flow(state: &SupportState, k: usize, ctrl: &StepControl) -> Result<SupportState> {
    let radii = curvature_radii(state);
    let scale = state.s.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let min_s = state.s.iter().cloned().fold(f64::INFINITY, f64::min);
    let all_dead = radii.iter().all(|r| r[0].min(r[1]) <= 0.0);
    if min_s <= 0.0 || all_dead {
        return Err(Error::Extinct { t: state.t });
    }
    for (node, r) in radii.iter().enumerate() {
        let rmin = r[0].min(r[1]);
        if rmin <= -RADIUS_TOL * (1.0 + scale) || rmin <= 0.0 {
            return Err(Error::ConvexityLost {
                node,
                min_radius: rmin,
            });
        }
    }

    // Closed-form speeds for the two sphere grids (n <= 2); the generic
    // symfun path stays the reference and the unit tests hold the two
    // routes together. coeff is the parabolic coefficient D_i Q_k lambda_i^2.
    let mut speeds = Vec::with_capacity(state.s.len());
    let mut max_coeff: f64 = 0.0;
    for (i, r) in radii.iter().enumerate() {
        let (qk, coeff) = match (state.grid, k) {
            (SphereGrid::Circle, 1) => {
                let lam = 1.0 / r[0];
                (lam, lam * lam)
            }
            (SphereGrid::AxisymmetricSphere, 1) => {
                let (l1, l2) = (1.0 / r[0], 1.0 / r[1]);
                (l1 + l2, l1.max(l2).powi(2))
            }
            (SphereGrid::AxisymmetricSphere, 2) => {
                let (l1, l2) = (1.0 / r[0], 1.0 / r[1]);
                let s1 = l1 + l2;
                if s1 <= symfun::admissibility_floor(2, l1.max(l2)) {
                    return Err(Error::ConvexityLost {
                        node: i,
                        min_radius: r[0].min(r[1]),
                    });
                }
                let q = l1 * l2 / s1;
                // D_1 Q_2 l1^2 = D_2 Q_2 l2^2 = Q_2^2
                (q, q * q)
            }
            _ => {
                return Err(Error::Config(format!(
                    "unsupported (grid, k) combination for the support flow: k={k}"
                )))
            }
        };
        max_coeff = max_coeff.max(coeff);
        speeds.push(qk);
    }

    let d = state.spacing();
    let mut dt = ctrl.cfl_safety * d * d / (2.0 * state.n as f64 * max_coeff);
    dt = dt.min(ctrl.dt_max);
    let remaining = ctrl.t_end - state.t;
    if remaining > 0.0 {
        dt = dt.min(remaining);
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config(format!("degenerate support-flow step {dt}")));
    }

    let mut out = state.clone();
    for (v, q) in out.s.iter_mut().zip(&speeds) {
        *v -= dt * q;
    }
    out.t = state.t + dt;
    Ok(out)
}

/// Monitor scan over the lower half of a closed body, read as a graph: the
/// contact point of a downward direction has upsilon = -1/cos(angle), height
/// from the boundary point, and curvatures 1/radii. |grad A| uses first
/// differences of the curvature field along the meridian arc length.
pub fn lower_half_scan(state: &SupportState, m_level: f64, k: usize) -> Result<ScanRecord> {
    let radii = curvature_radii(state);
    let len = state.s.len();
    let mut rec = ScanRecord {
        sup_psi_upsilon: f64::NEG_INFINITY,
        inf_psi_inv_qk: f64::INFINITY,
        sup_psi_qk_sq: f64::NEG_INFINITY,
        sup_psi2_lambda_max: f64::NEG_INFINITY,
        sup_qk_sq: f64::NEG_INFINITY,
        sup_upsilon: f64::NEG_INFINITY,
        sup_psi2_grad_a: f64::NEG_INFINITY,
    };
    let lambdas: Vec<Option<CurvatureVector>> = (0..len)
        .map(|i| {
            let a = state.angle(i);
            if a.cos() < -1e-9 {
                Some(node_lambda(state, &radii[i]))
            } else {
                None
            }
        })
        .collect();
    let mut support = 0usize;
    for i in 0..len {
        let Some(lambda) = lambdas[i].as_ref() else { continue };
        let (_, height) = state.boundary_point(i);
        let psi = (m_level - height).max(0.0);
        if psi <= 0.0 {
            continue;
        }
        support += 1;
        let upsilon = -1.0 / state.angle(i).cos();
        let rep = symfun::report(lambda, k)?;
        let lam_max = lambda.lambda_max();
        // first differences of curvature components along arc length
        let mut grad_a2 = 0.0;
        let prev = if i > 0 { lambdas[i - 1].as_ref() } else { None };
        let next = if i + 1 < len { lambdas[i + 1].as_ref() } else { None };
        let ds = radii[i][0].max(1e-12) * state.spacing();
        let comps = lambda.n();
        for c in 0..comps {
            let here = lambda.values()[c];
            let d = match (prev, next) {
                (Some(p), Some(q)) => (q.values()[c] - p.values()[c]) / (2.0 * ds),
                (Some(p), None) => (here - p.values()[c]) / ds,
                (None, Some(q)) => (q.values()[c] - here) / ds,
                (None, None) => 0.0,
            };
            grad_a2 += d * d;
        }
        rec.sup_psi_upsilon = rec.sup_psi_upsilon.max(psi * upsilon);
        rec.inf_psi_inv_qk = rec.inf_psi_inv_qk.min(rep.qk / psi);
        rec.sup_psi_qk_sq = rec.sup_psi_qk_sq.max((psi * rep.qk) * (psi * rep.qk));
        rec.sup_psi2_lambda_max = rec.sup_psi2_lambda_max.max(psi * psi * lam_max);
        rec.sup_qk_sq = rec.sup_qk_sq.max(rep.qk * rep.qk);
        rec.sup_upsilon = rec.sup_upsilon.max(upsilon);
        rec.sup_psi2_grad_a = rec.sup_psi2_grad_a.max(psi * psi * grad_a2);
    }
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse_support(a: f64, b: f64, nodes: usize) -> SupportState {
        // semi-axis a horizontal, b vertical; angle from the vertical axis
        let s = (0..nodes)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / nodes as f64;
                ((a * th.sin()).powi(2) + (b * th.cos()).powi(2)).sqrt()
            })
            .collect();
        SupportState::new(SphereGrid::Circle, s, 0.0)
    }

    #[test]
    fn radii_of_balls_everywhere() {
        let c = SupportState::ball(SphereGrid::Circle, 2.0, 0.0, 128);
        for r in curvature_radii(&c) {
            assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
        }
        let s = SupportState::ball(SphereGrid::AxisymmetricSphere, 1.5, 0.0, 129);
        for r in curvature_radii(&s) {
            assert!((r[0] - 1.5).abs() < 1e-12 && (r[1] - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn radii_of_offset_ball_on_sphere_grid() {
        // ball of radius R centered at height c: S = c cos(phi) + R
        let nodes = 257;
        let (r, c) = (1.2, 0.4);
        let s = (0..nodes)
            .map(|i| c * (PI * i as f64 / (nodes - 1) as f64).cos() + r)
            .collect();
        let st = SupportState::new(SphereGrid::AxisymmetricSphere, s, 0.0);
        for (i, radii) in curvature_radii(&st).iter().enumerate() {
            assert!((radii[0] - r).abs() < 2e-4, "r1 node {i}: {}", radii[0]);
            assert!((radii[1] - r).abs() < 2e-4, "r2 node {i}: {}", radii[1]);
        }
    }

    #[test]
    fn radii_of_cos2_perturbation() {
        // S = R + a cos(2 theta)  =>  rho = R - 3 a cos(2 theta) + O(d^2)
        let nodes = 512;
        let (r, a) = (2.0, 0.05);
        let s = (0..nodes)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / nodes as f64;
                r + a * (2.0 * th).cos()
            })
            .collect();
        let st = SupportState::new(SphereGrid::Circle, s, 0.0);
        for (i, radii) in curvature_radii(&st).iter().enumerate() {
            let th = 2.0 * PI * i as f64 / nodes as f64;
            let expect = r - 3.0 * a * (2.0 * th).cos();
            assert!((radii[0] - expect).abs() < 1e-4, "node {i}");
        }
    }

    #[test]
    fn envelope_shifts_radii_and_composes() {
        let e = ellipse_support(1.4, 1.0, 256);
        let off = eta_envelope(&e, 0.3);
        let r0 = curvature_radii(&e);
        let r1 = curvature_radii(&off);
        for (a, b) in r0.iter().zip(&r1) {
            assert!((b[0] - a[0] - 0.3).abs() < 1e-10);
        }
        let twice = eta_envelope(&eta_envelope(&e, 0.1), 0.2);
        for (a, b) in off.s.iter().zip(&twice.s) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn envelope_matches_point_cloud_offset_oracle() {
        // offset boundary points along outward normals, refit the support
        let (a, b, eta) = (1.3, 1.0, 0.1);
        let e = ellipse_support(a, b, 256);
        let off = eta_envelope(&e, eta);
        let samples = 200_000;
        let mut cloud = Vec::with_capacity(samples);
        for s in 0..samples {
            let t = 2.0 * PI * s as f64 / samples as f64;
            let (x, y) = (a * t.cos(), b * t.sin());
            let nrm = ((b * t.cos()).powi(2) + (a * t.sin()).powi(2)).sqrt();
            let (nx, ny) = (b * t.cos() / nrm, a * t.sin() / nrm);
            cloud.push((x + eta * nx, y + eta * ny));
        }
        for i in 0..off.s.len() {
            let th = off.angle(i);
            // direction (sin, cos) against cloud coordinates (x, y)
            let (vx, vy) = (th.sin(), th.cos());
            let oracle = cloud
                .iter()
                .map(|&(x, y)| vx * x + vy * y)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((off.s[i] - oracle).abs() < 1e-6, "node {i}");
        }
    }

    #[test]
    fn mollifier_normalizes_on_both_spheres() {
        for n in [1usize, 2] {
            for eps in [0.3, 0.1, 0.03] {
                let m = Mollifier::new(eps, n);
                assert!(
                    m.integral_deviation().abs() < 1e-10,
                    "n={n} eps={eps}: {}",
                    m.integral_deviation()
                );
            }
        }
    }

    #[test]
    fn mollify_fixes_balls_exactly() {
        let m = Mollifier::new(0.2, 1);
        let c = SupportState::ball(SphereGrid::Circle, 2.0, 0.0, 256);
        let out = mollify(&c, &m).unwrap();
        for v in &out.s {
            assert!((v - 2.0).abs() < 1e-10);
        }
        let m2 = Mollifier::new(0.2, 2);
        let s = SupportState::ball(SphereGrid::AxisymmetricSphere, 1.0, 0.0, 257);
        let out = mollify(&s, &m2).unwrap();
        for v in &out.s {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mollify_c1_error_decreases_with_eps() {
        let e = ellipse_support(1.05, 1.0, 512);
        let mut errs = Vec::new();
        for eps in [0.3, 0.1, 0.03] {
            let m = Mollifier::new(eps, 1);
            let out = mollify(&e, &m).unwrap();
            let mut c0 = 0.0f64;
            let mut c1 = 0.0f64;
            for i in 0..e.s.len() {
                c0 = c0.max((out.s[i] - e.s[i]).abs());
                c1 = c1.max((out.s_angle(i) - e.s_angle(i)).abs());
            }
            errs.push(c0.max(c1));
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn mollify_preserves_envelope_radius_floor() {
        let eta = 0.25;
        let e = eta_envelope(&ellipse_support(1.2, 1.0, 512), eta);
        let floor = min_radius(&e);
        assert!(floor >= eta);
        for eps in [0.3, 0.1, 0.03] {
            let out = mollify(&e, &Mollifier::new(eps, 1)).unwrap();
            assert!(
                min_radius(&out) >= floor - 1e-3,
                "eps={eps}: {} < {floor}",
                min_radius(&out)
            );
        }
    }

    #[test]
    fn perturb_flat_graph_has_unit_vertex_curvature() {
        let g = GraphState::radial(2, 1, 128, 1.0, 100.0, |_| 0.0);
        let p = perturb_graph(&g, 1.0);
        // phi''(0) = 1
        let urr = (p.u[1] - 2.0 * p.u[0] + p.u[1]) / (p.spacing * p.spacing);
        assert!((urr - 1.0).abs() < 1e-3, "{urr}");
        // monotone decreasing perturbation in j
        let p2 = perturb_graph(&g, 2.0);
        for i in 0..g.nx {
            assert!(p.u[i] >= p2.u[i]);
            assert!(p2.u[i] >= g.u[i]);
        }
    }

    #[test]
    fn perturb_makes_ridge_strictly_convex() {
        // smooth weakly convex ridge: flat in a band around the origin
        let g = GraphState::radial(2, 1, 200, 2.0, 100.0, |r| {
            if r < 1.0 {
                0.0
            } else {
                (r - 1.0).powi(4)
            }
        });
        let p = perturb_graph(&g, 4.0);
        for i in 0..p.nx - 1 {
            let f = crate::geometry::frame_at(&p, i, 10.0).unwrap();
            for &l in f.lambda.values() {
                assert!(l > 0.0, "node {i}: {l}");
            }
        }
    }

    #[test]
    fn reflect_produces_symmetric_body() {
        let g = GraphState::radial(2, 1, 256, 2.0, 100.0, |r| 0.5 * r * r);
        let st = reflect_and_close(&g, 2.0, 0.0).unwrap();
        let len = st.s.len();
        for i in 0..len {
            let mirrored = st.s[len - 1 - i];
            assert!((st.s[i] - mirrored).abs() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn reflect_hemisphere_gives_unit_ball() {
        let g = GraphState::radial(2, 1, 512, 1.0, 100.0, |r| {
            1.0 - (1.0 - (r * r).min(1.0)).sqrt()
        });
        let st = reflect_and_close_with_grid(&g, 1.0, 0.0, 513).unwrap();
        for (i, v) in st.s.iter().enumerate() {
            assert!((v - 1.0).abs() < 1.5e-3, "node {i}: {v}");
            assert!(*v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn reflect_nesting_in_level() {
        // paraboloid reflected at j=2 nests inside the j=3 body
        let g = GraphState::radial(2, 1, 512, 3.0, 100.0, |r| 0.5 * r * r);
        let s2 = reflect_and_close(&g, 2.0, 0.0).unwrap();
        let s3 = reflect_and_close(&g, 3.0, 0.0).unwrap();
        for i in 0..s2.s.len() {
            let a = s2.support_about_zero(i);
            let b = s3.support_about_zero(i);
            assert!(a <= b + 1e-10, "node {i}: {a} vs {b}");
        }
    }

    #[test]
    fn reflect_requires_dip_below_level() {
        let g = GraphState::radial(2, 1, 64, 1.0, 100.0, |r| 5.0 + r * r);
        match reflect_and_close(&g, 2.0, 0.0) {
            Err(Error::NotBelowLevel { .. }) => {}
            other => panic!("expected NotBelowLevel, got {other:?}"),
        }
    }

    #[test]
    fn support_step_on_ball_matches_constant_speed() {
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-4,
            t_end: 1.0,
            monitor_every: 1,
        };
        for (grid, n, k) in [
            (SphereGrid::Circle, 1usize, 1usize),
            (SphereGrid::AxisymmetricSphere, 2, 1),
            (SphereGrid::AxisymmetricSphere, 2, 2),
        ] {
            let nodes = if grid == SphereGrid::Circle { 256 } else { 257 };
            let b = SupportState::ball(grid, 2.0, 0.0, nodes);
            let out = step_support_flow(&b, k, &ctrl).unwrap();
            let dt = out.t;
            let expect = 2.0 - dt * (n - k + 1) as f64 / k as f64 / 2.0;
            for v in &out.s {
                assert!((v - expect).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn step_speeds_agree_with_generic_symfun_route() {
        // the stepper's closed forms against symfun::report, node by node
        let nodes = 129;
        let s: Vec<f64> = (0..nodes)
            .map(|i| {
                let th = PI * i as f64 / (nodes - 1) as f64;
                1.3 + 0.08 * (2.0 * th).cos() + 0.03 * (3.0 * th).cos()
            })
            .collect();
        let st = SupportState::new(SphereGrid::AxisymmetricSphere, s, 0.0);
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-4,
            t_end: 1.0,
            monitor_every: 1,
        };
        let radii = curvature_radii(&st);
        for k in [1usize, 2] {
            let out = step_support_flow(&st, k, &ctrl).unwrap();
            let dt = out.t - st.t;
            for (i, r) in radii.iter().enumerate() {
                let rep = symfun::report(&node_lambda(&st, r), k).unwrap();
                let expect = st.s[i] - dt * rep.qk;
                assert!(
                    (out.s[i] - expect).abs() < 1e-13,
                    "node {i} k={k}: {} vs {expect}",
                    out.s[i]
                );
            }
        }
    }

    #[test]
    fn circle_shrinks_on_the_exact_law() {
        // n=1, k=1: rho(t)^2 = R^2 - 2t, extinction at 1/2 for R=1
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-3,
            t_end: 0.45,
            monitor_every: 1,
        };
        let mut st = SupportState::ball(SphereGrid::Circle, 1.0, 0.0, 128);
        while st.t < ctrl.t_end * (1.0 - 1e-12) {
            st = step_support_flow(&st, 1, &ctrl).unwrap();
        }
        let expect = (1.0 - 2.0 * st.t).sqrt();
        for v in &st.s {
            assert!((v - expect).abs() / expect < 1e-3, "{v} vs {expect}");
        }
    }

    #[test]
    fn flow_preserves_reflection_symmetry() {
        let g = GraphState::radial(2, 1, 192, 1.5, 100.0, |r| 0.5 * r * r);
        let body = reflect_and_close(&g, 1.5, 0.2).unwrap();
        let m = Mollifier::new(0.15, 2);
        let mut st = mollify(&body, &m).unwrap();
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-3,
            t_end: 0.05,
            monitor_every: 1,
        };
        while st.t < ctrl.t_end * (1.0 - 1e-12) {
            st = step_support_flow(&st, 1, &ctrl).unwrap();
        }
        let len = st.s.len();
        for i in 0..len {
            assert!((st.s[i] - st.s[len - 1 - i]).abs() <= 1e-8, "node {i}");
        }
    }

    #[test]
    fn flow_preserves_nesting() {
        // enclosed body stays enclosed under equal-time evolution
        let inner = SupportState::ball(SphereGrid::AxisymmetricSphere, 1.0, 0.0, 129);
        let outer = {
            let nodes = 129;
            let s = (0..nodes)
                .map(|i| {
                    let th = PI * i as f64 / (nodes - 1) as f64;
                    1.15 + 0.05 * (2.0 * th).cos()
                })
                .collect();
            SupportState::new(SphereGrid::AxisymmetricSphere, s, 0.0)
        };
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-3,
            t_end: 0.08,
            monitor_every: 1,
        };
        let (mut a, mut b) = (inner, outer);
        while a.t < ctrl.t_end * (1.0 - 1e-12) {
            a = step_support_flow(&a, 1, &ctrl).unwrap();
            // keep the outer body on the same clock
            let sync = StepControl {
                t_end: a.t,
                ..ctrl
            };
            while b.t < a.t * (1.0 - 1e-12) {
                b = step_support_flow(&b, 1, &sync).unwrap();
            }
        }
        let scale = b.s.iter().cloned().fold(0.0f64, f64::max);
        for i in 0..a.s.len() {
            assert!(a.s[i] <= b.s[i] + 1e-3 * scale, "node {i}");
        }
    }

    #[test]
    fn ball_reaches_numeric_extinction_on_schedule() {
        // CFL steps shrink with the body, so the radius decays through the
        // threshold rather than crossing zero; the threshold time is the
        // numeric extinction time. R = 1/2, n = 1, k = 1: T = R^2/2 = 1/8.
        let ctrl = StepControl {
            cfl_safety: 0.3,
            dt_max: 5e-3,
            t_end: 10.0,
            monitor_every: 1,
        };
        let r0 = 0.5;
        let mut st = SupportState::ball(SphereGrid::Circle, r0, 0.0, 64);
        let threshold = 1e-3 * r0;
        let mut reached = false;
        for _ in 0..200_000 {
            st = step_support_flow(&st, 1, &ctrl).unwrap();
            if st.s.iter().cloned().fold(f64::INFINITY, f64::min) < threshold {
                reached = true;
                break;
            }
        }
        assert!(reached, "ball never shrank to the threshold");
        let t_exact = r0 * r0 / 2.0;
        assert!(
            (st.t - t_exact).abs() / t_exact < 1e-3,
            "numeric extinction {} vs {t_exact}",
            st.t
        );
    }

    #[test]
    fn dead_states_report_extinction() {
        let ctrl = StepControl {
            cfl_safety: 0.2,
            dt_max: 1e-3,
            t_end: 1.0,
            monitor_every: 1,
        };
        let dead = SupportState::ball(SphereGrid::Circle, -0.1, 0.0, 64);
        assert!(matches!(
            step_support_flow(&dead, 1, &ctrl),
            Err(Error::Extinct { .. })
        ));
        // one bad node keeps the body alive but non-convex
        let mut dent = SupportState::ball(SphereGrid::Circle, 1.0, 0.0, 64);
        dent.s[10] = 0.2;
        assert!(matches!(
            step_support_flow(&dent, 1, &ctrl),
            Err(Error::ConvexityLost { .. })
        ));
    }

    #[test]
    fn lower_half_scan_sees_the_cap() {
        let g = GraphState::radial(2, 2, 256, 1.5, 100.0, |r| 0.5 * r * r);
        let body = reflect_and_close(&g, 1.5, 0.2).unwrap();
        let st = mollify(&body, &Mollifier::new(0.1, 2)).unwrap();
        let rec = lower_half_scan(&st, 1.0, 2).unwrap();
        assert!(rec.sup_psi_upsilon.is_finite() && rec.sup_psi_upsilon > 0.0);
        assert!(rec.inf_psi_inv_qk > 0.0);
        match lower_half_scan(&st, -10.0, 2) {
            Err(Error::EmptySupport) => {}
            other => panic!("expected EmptySupport, got {other:?}"),
        }
    }
}
