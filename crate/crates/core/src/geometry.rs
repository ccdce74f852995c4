//! Discrete differential geometry of convex graph hypersurfaces.
//!
//! A hypersurface given as a graph x -> (x, u(x)) carries
//!
//! ```text
//! g_ij = delta_ij + u_i u_j          (metric)
//! h_ij = u_ij / upsilon              (second fundamental form)
//! upsilon = sqrt(1 + |Du|^2)         (gradient function)
//! psi = (M - u)_+                    (cutoff below level M)
//! ```
//!
//! and the principal curvatures are the eigenvalues of the shape operator
//! `g^{-1} h`, computed here through the symmetrized similarity
//! `g^{-1/2} h g^{-1/2}` with the closed form
//! `g^{-1/2} = I - Du (x) Du / (upsilon (upsilon + 1))`.
//!
//! Two grid flavours are supported: a full 2-D uniform grid (graphs over a
//! square, with an inside-domain mask encoded by infinite heights) and a
//! radial 1-D grid for rotationally symmetric graphs in any dimension, where
//! the curvatures have the closed forms
//!
//! ```text
//! lambda_rad = u_rr / (1 + u_r^2)^{3/2},
//! lambda_tan = u_r / (r sqrt(1 + u_r^2))   (multiplicity n - 1),
//! ```
//!
//! with the pole limit lambda_tan(0) = lambda_rad(0) = u_rr(0) enforced by
//! even extension across r = 0. Derivatives are second-order central
//! differences throughout.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::symfun::{self, CurvatureVector};

/// Discrete convexity slack: eigenvalues may dip to
/// `-CONVEXITY_TOL * (1 + |lambda|_max)` before the state counts as
/// non-convex.
const CONVEXITY_TOL: f64 = 1e-8;

/// Slack for the Euler formula check h_ii/g_ii <= lambda_max.
const EULER_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    Full2d,
    Radial,
}

/// A discretized convex graph together with its flow parameters.
///
/// `full2d`: `u[j*nx + i]` on a uniform grid over a square of half-width
/// `extent` centered at the origin; nodes outside the domain hold
/// `f64::INFINITY`. Forces n = 2.
///
/// `radial`: `u[i]` at `r_i = i * spacing` on `[0, extent]`; any n >= 1.
#[derive(Debug, Clone)]
pub struct GraphState {
    pub mode: GridMode,
    pub u: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub n: usize,
    pub k: usize,
    pub t: f64,
    /// Heights above this are frozen (Dirichlet); the flow is solved below.
    pub clip_ceiling: f64,
}

/// Named initial graphs used by experiments and presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// u = r^2 / 2
    Paraboloid,
    /// u = r^2 / 2 + c r^4
    ParaboloidQuartic { c: f64 },
    /// u = -log(1 - r^2) on r < 1
    Cup,
    /// u = R - sqrt(R^2 - r^2), the lower hemisphere of radius R
    Hemisphere { r: f64 },
    /// u = 0 on a disk (weakly convex input for the closure construction)
    Flat,
}

impl InitialData {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            InitialData::Paraboloid => 0.5 * r * r,
            InitialData::ParaboloidQuartic { c } => 0.5 * r * r + c * r.powi(4),
            InitialData::Cup => {
                if r < 1.0 {
                    -(1.0 - r * r).ln()
                } else {
                    f64::INFINITY
                }
            }
            InitialData::Hemisphere { r: rad } => {
                if r <= rad {
                    rad - (rad * rad - r * r).sqrt()
                } else {
                    f64::INFINITY
                }
            }
            InitialData::Flat => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialData::Paraboloid => "paraboloid",
            InitialData::ParaboloidQuartic { .. } => "paraboloid-quartic",
            InitialData::Cup => "cup",
            InitialData::Hemisphere { .. } => "hemisphere",
            InitialData::Flat => "flat",
        }
    }
}

impl GraphState {
    /// Radial graph from a profile function; `nodes` grid intervals, so
    /// `nodes + 1` samples on [0, extent].
    pub fn radial(
        n: usize,
        k: usize,
        nodes: usize,
        extent: f64,
        clip_ceiling: f64,
        f: impl Fn(f64) -> f64,
    ) -> Self {
        assert!(n >= 1 && k >= 1 && k <= n);
        assert!(nodes >= 8);
        let spacing = extent / nodes as f64;
        let u: Vec<f64> = (0..=nodes).map(|i| f(i as f64 * spacing)).collect();
        Self {
            mode: GridMode::Radial,
            u,
            nx: nodes + 1,
            ny: 1,
            spacing,
            n,
            k,
            t: 0.0,
            clip_ceiling,
        }
    }

    /// Full 2-D graph over the square [-extent, extent]^2; `f` returns
    /// `f64::INFINITY` outside the domain. n is forced to 2.
    pub fn full2d(
        k: usize,
        nodes: usize,
        extent: f64,
        clip_ceiling: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        assert!(k >= 1 && k <= 2);
        assert!(nodes >= 8);
        let nx = nodes + 1;
        let spacing = 2.0 * extent / nodes as f64;
        let mut u = Vec::with_capacity(nx * nx);
        for j in 0..nx {
            for i in 0..nx {
                let x = -extent + i as f64 * spacing;
                let y = -extent + j as f64 * spacing;
                u.push(f(x, y));
            }
        }
        Self {
            mode: GridMode::Full2d,
            u,
            nx,
            ny: nx,
            spacing,
            n: 2,
            k,
            t: 0.0,
            clip_ceiling,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Radius of radial node i.
    pub fn node_r(&self, i: usize) -> f64 {
        debug_assert_eq!(self.mode, GridMode::Radial);
        i as f64 * self.spacing
    }

    /// Coordinates of full2d node (i, j).
    pub fn node_xy(&self, i: usize, j: usize) -> (f64, f64) {
        debug_assert_eq!(self.mode, GridMode::Full2d);
        let half = 0.5 * (self.nx - 1) as f64 * self.spacing;
        (
            -half + i as f64 * self.spacing,
            -half + j as f64 * self.spacing,
        )
    }

    /// Minimum height over the domain (finite values).
    pub fn min_height(&self) -> f64 {
        self.u
            .iter()
            .cloned()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the node is updated by the flow: finite, below the clip
    /// ceiling, and with a complete stencil.
    pub fn is_active(&self, flat: usize) -> bool {
        if !self.u[flat].is_finite() || self.u[flat] > self.clip_ceiling {
            return false;
        }
        match self.mode {
            GridMode::Radial => {
                // pole uses even extension; the outer endpoint is Dirichlet
                flat + 1 < self.nx && self.u[flat + 1].is_finite()
            }
            GridMode::Full2d => {
                let (i, j) = (flat % self.nx, flat / self.nx);
                if i == 0 || j == 0 || i + 1 >= self.nx || j + 1 >= self.ny {
                    return false;
                }
                for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let idx = (j as i64 + dj) as usize * self.nx + (i as i64 + di) as usize;
                        if !self.u[idx].is_finite() {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

/// Pointwise geometric data extracted from the graph.
#[derive(Debug, Clone)]
pub struct PointFrame {
    /// Gradient Du (length n; radial frames put u_r in the first slot).
    pub du: Vec<f64>,
    /// Metric g = I + Du (x) Du, row-major n x n.
    pub gij: Vec<f64>,
    /// Second fundamental form h = D^2 u / upsilon, row-major n x n.
    pub hij: Vec<f64>,
    /// Principal curvatures, ascending.
    pub lambda: CurvatureVector,
    /// sqrt(1 + |Du|^2) >= 1.
    pub upsilon: f64,
    /// (M - u)_+.
    pub psi: f64,
}

/// Raw per-node curvature data shared by frames, scans and the stepper.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NodeGeom {
    /// (lambda_rad, lambda_tan) for radial grids, the two shape-operator
    /// eigenvalues for full2d (unsorted).
    pub lam: [f64; 2],
    pub upsilon: f64,
    /// Second-fundamental-form components: radial (h_rr, h_tt, unused),
    /// full2d (h_11, h_12, h_22).
    pub h: [f64; 3],
    pub du: [f64; 2],
}

/// Eigenvalues of g^{-1} h for a 2-D graph point via the symmetrized form.
pub fn principal_curvatures_2d(du: [f64; 2], d2u: [f64; 3]) -> [f64; 2] {
    let p2 = du[0] * du[0] + du[1] * du[1];
    let upsilon = (1.0 + p2).sqrt();
    // g^{-1/2} = I - c Du (x) Du with c = 1/(upsilon (upsilon + 1))
    let c = 1.0 / (upsilon * (upsilon + 1.0));
    let m = [
        1.0 - c * du[0] * du[0],
        -c * du[0] * du[1],
        1.0 - c * du[1] * du[1],
    ];
    let h = [d2u[0] / upsilon, d2u[1] / upsilon, d2u[2] / upsilon];
    // a = m h m, symmetric 2x2
    let t00 = h[0] * m[0] + h[1] * m[1];
    let t01 = h[0] * m[1] + h[1] * m[2];
    let t10 = h[1] * m[0] + h[2] * m[1];
    let t11 = h[1] * m[1] + h[2] * m[2];
    let a00 = m[0] * t00 + m[1] * t10;
    let a01 = m[0] * t01 + m[1] * t11;
    let a11 = m[1] * t01 + m[2] * t11;
    let mean = 0.5 * (a00 + a11);
    let disc = (0.5 * (a00 - a11)).hypot(a01);
    [mean - disc, mean + disc]
}

/// Curvature data at one node. Radial grids use even extension at the pole;
/// the full2d stencil is the 3x3 neighborhood.
pub(crate) fn node_geom(state: &GraphState, flat: usize) -> Result<NodeGeom> {
    let h = state.spacing;
    match state.mode {
        GridMode::Radial => {
            let i = flat;
            if i + 1 >= state.nx {
                return Err(Error::BoundaryStencil { node: flat });
            }
            let um = if i == 0 { state.u[1] } else { state.u[i - 1] };
            let u0 = state.u[i];
            let up = state.u[i + 1];
            if !(um.is_finite() && u0.is_finite() && up.is_finite()) {
                return Err(Error::BoundaryStencil { node: flat });
            }
            let ur = (up - um) / (2.0 * h);
            let urr = (up - 2.0 * u0 + um) / (h * h);
            let upsilon = (1.0 + ur * ur).sqrt();
            let lam_rad = urr / (upsilon * upsilon * upsilon);
            let lam_tan = if i == 0 {
                // smooth pole: both curvatures equal u_rr(0)
                urr
            } else {
                ur / (state.node_r(i) * upsilon)
            };
            let h_tt = if i == 0 { urr / upsilon } else { ur / (state.node_r(i) * upsilon) };
            Ok(NodeGeom {
                lam: [lam_rad, lam_tan],
                upsilon,
                h: [urr / upsilon, h_tt, 0.0],
                du: [ur, 0.0],
            })
        }
        GridMode::Full2d => {
            let (i, j) = (flat % state.nx, flat / state.nx);
            if i == 0 || j == 0 || i + 1 >= state.nx || j + 1 >= state.ny {
                return Err(Error::BoundaryStencil { node: flat });
            }
            let at = |ii: usize, jj: usize| state.u[jj * state.nx + ii];
            let stencil = [
                at(i - 1, j - 1),
                at(i, j - 1),
                at(i + 1, j - 1),
                at(i - 1, j),
                at(i, j),
                at(i + 1, j),
                at(i - 1, j + 1),
                at(i, j + 1),
                at(i + 1, j + 1),
            ];
            if stencil.iter().any(|v| !v.is_finite()) {
                return Err(Error::BoundaryStencil { node: flat });
            }
            let ux = (stencil[5] - stencil[3]) / (2.0 * h);
            let uy = (stencil[7] - stencil[1]) / (2.0 * h);
            let uxx = (stencil[5] - 2.0 * stencil[4] + stencil[3]) / (h * h);
            let uyy = (stencil[7] - 2.0 * stencil[4] + stencil[1]) / (h * h);
            let uxy = (stencil[8] - stencil[6] - stencil[2] + stencil[0]) / (4.0 * h * h);
            let upsilon = (1.0 + ux * ux + uy * uy).sqrt();
            let lam = principal_curvatures_2d([ux, uy], [uxx, uxy, uyy]);
            Ok(NodeGeom {
                lam,
                upsilon,
                h: [uxx / upsilon, uxy / upsilon, uyy / upsilon],
                du: [ux, uy],
            })
        }
    }
}

/// The curvature vector of a node, with tangential multiplicity expanded and
/// entries ascending.
pub(crate) fn lambda_of(state: &GraphState, geom: &NodeGeom) -> CurvatureVector {
    let mut v = match state.mode {
        GridMode::Radial => {
            let mut v = Vec::with_capacity(state.n);
            v.push(geom.lam[0]);
            for _ in 1..state.n {
                v.push(geom.lam[1]);
            }
            v
        }
        GridMode::Full2d => vec![geom.lam[0], geom.lam[1]],
    };
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    CurvatureVector::new(v)
}

pub(crate) fn check_convex(state: &GraphState, flat: usize, geom: &NodeGeom) -> Result<()> {
    let min_eig = if state.mode == GridMode::Radial && state.n == 1 {
        geom.lam[0]
    } else {
        geom.lam[0].min(geom.lam[1])
    };
    let scale = geom.lam[0].abs().max(geom.lam[1].abs());
    if min_eig < -CONVEXITY_TOL * (1.0 + scale) {
        return Err(Error::NonConvex {
            node: flat,
            min_eig,
            t: state.t,
        });
    }
    Ok(())
}

/// Full frame at a grid node: derivatives, metric, second fundamental form,
/// principal curvatures, gradient function, and the cutoff at level M.
pub fn frame_at(state: &GraphState, node: usize, m_level: f64) -> Result<PointFrame> {
    let geom = node_geom(state, node)?;
    check_convex(state, node, &geom)?;
    let n = state.n;
    let lambda = lambda_of(state, &geom);
    let psi = (m_level - state.u[node]).max(0.0);

    let (du, gij, hij) = match state.mode {
        GridMode::Radial => {
            let ur = geom.du[0];
            let mut du = vec![0.0; n];
            du[0] = ur;
            let mut g = vec![0.0; n * n];
            let mut hh = vec![0.0; n * n];
            for i in 0..n {
                g[i * n + i] = 1.0;
            }
            g[0] += ur * ur;
            hh[0] = geom.h[0];
            for i in 1..n {
                hh[i * n + i] = geom.h[1];
            }
            (du, g, hh)
        }
        GridMode::Full2d => {
            let du = vec![geom.du[0], geom.du[1]];
            let g = vec![
                1.0 + du[0] * du[0],
                du[0] * du[1],
                du[0] * du[1],
                1.0 + du[1] * du[1],
            ];
            let hh = vec![geom.h[0], geom.h[1], geom.h[1], geom.h[2]];
            (du, g, hh)
        }
    };

    Ok(PointFrame {
        du,
        gij,
        hij,
        lambda,
        upsilon: geom.upsilon,
        psi,
    })
}

/// Euler's formula h_ii / g_ii <= lambda_max, checked for every coordinate
/// index.
pub fn euler_formula_check(frame: &PointFrame) -> bool {
    let n = frame.lambda.n();
    let lmax = frame.lambda.lambda_max();
    (0..n).all(|i| {
        let ratio = frame.hij[i * n + i] / frame.gij[i * n + i];
        ratio - lmax <= EULER_SLACK * (1.0 + lmax.abs())
    })
}

/// Extrema of the monitored a priori quantities over the support of psi.
#[derive(Debug, Clone, Copy)]
pub struct ScanRecord {
    pub sup_psi_upsilon: f64,
    pub inf_psi_inv_qk: f64,
    pub sup_psi_qk_sq: f64,
    pub sup_psi2_lambda_max: f64,
    pub sup_qk_sq: f64,
    pub sup_upsilon: f64,
    pub sup_psi2_grad_a: f64,
}

/// Per-node evaluation cache built once per step and shared by the stepper,
/// the CFL control and the monitor scan.
pub(crate) struct FieldEval {
    pub geom: NodeGeom,
    pub qk: f64,
    pub max_d: f64,
}

pub(crate) type Field = Vec<Option<FieldEval>>;

/// Evaluate geometry and speed at every active node. Fails on loss of
/// convexity or admissibility anywhere on the active mask.
pub(crate) fn compute_field(state: &GraphState, field: &mut Field) -> Result<()> {
    field.clear();
    match state.mode {
        GridMode::Radial => {
            field.reserve(state.num_nodes());
            for flat in 0..state.num_nodes() {
                field.push(eval_node(state, flat)?);
            }
            Ok(())
        }
        GridMode::Full2d => {
            let rows: Result<Vec<Vec<Option<FieldEval>>>> = (0..state.ny)
                .into_par_iter()
                .map(|j| {
                    (0..state.nx)
                        .map(|i| eval_node(state, j * state.nx + i))
                        .collect()
                })
                .collect();
            for row in rows? {
                field.extend(row);
            }
            Ok(())
        }
    }
}

fn eval_node(state: &GraphState, flat: usize) -> Result<Option<FieldEval>> {
    if !state.is_active(flat) {
        return Ok(None);
    }
    let geom = node_geom(state, flat)?;
    // No convexity requirement here: the layer next to frozen Dirichlet data
    // legitimately dips out of the convex cone, and the speed only needs
    // S_{k-1} > 0. Convexity is enforced on the support of psi instead.
    let lambda = lambda_of(state, &geom);
    let rep = symfun::report_extended(&lambda, state.k)?;
    let max_d = rep.grad_qk.iter().cloned().fold(0.0, f64::max);
    Ok(Some(FieldEval {
        geom,
        qk: rep.qk,
        max_d,
    }))
}

/// Enforce discrete convexity on the support of psi (the monitored region).
/// Non-convexity there is a genuine violation and rejects the step.
pub(crate) fn validate_support_convexity(
    state: &GraphState,
    field: &Field,
    m_level: f64,
) -> Result<()> {
    for (flat, ev) in field.iter().enumerate() {
        let Some(ev) = ev.as_ref() else { continue };
        if state.u[flat] < m_level {
            check_convex(state, flat, &ev.geom)?;
        }
    }
    Ok(())
}

/// Scan the support of psi using the flow's own k.
pub fn global_monitor_scan(state: &GraphState, m_level: f64) -> Result<ScanRecord> {
    global_monitor_scan_for_k(state, m_level, state.k)
}

/// Scan with an explicit speed index (used to monitor Q_k along a mean
/// curvature flow run for k > 1).
pub fn global_monitor_scan_for_k(state: &GraphState, m_level: f64, k: usize) -> Result<ScanRecord> {
    let mut field: Field = Vec::new();
    compute_field(state, &mut field)?;
    scan_field(state, &field, m_level, k)
}

pub(crate) fn scan_field(
    state: &GraphState,
    field: &Field,
    m_level: f64,
    k: usize,
) -> Result<ScanRecord> {
    let mut rec = ScanRecord {
        sup_psi_upsilon: f64::NEG_INFINITY,
        inf_psi_inv_qk: f64::INFINITY,
        sup_psi_qk_sq: f64::NEG_INFINITY,
        sup_psi2_lambda_max: f64::NEG_INFINITY,
        sup_qk_sq: f64::NEG_INFINITY,
        sup_upsilon: f64::NEG_INFINITY,
        sup_psi2_grad_a: f64::NEG_INFINITY,
    };
    let mut support = 0usize;
    for flat in 0..state.num_nodes() {
        let Some(ev) = field[flat].as_ref() else {
            continue;
        };
        let psi = (m_level - state.u[flat]).max(0.0);
        if psi <= 0.0 {
            continue;
        }
        support += 1;
        check_convex(state, flat, &ev.geom)?;
        let qk_here = if k == state.k {
            ev.qk
        } else {
            let lambda = lambda_of(state, &ev.geom);
            symfun::qk(&lambda, k)?
        };
        let lam_max = ev.geom.lam[0].max(ev.geom.lam[1]);
        let grad_a2 = grad_a_squared(state, field, flat);
        rec.sup_psi_upsilon = rec.sup_psi_upsilon.max(psi * ev.geom.upsilon);
        rec.inf_psi_inv_qk = rec.inf_psi_inv_qk.min(qk_here / psi);
        rec.sup_psi_qk_sq = rec.sup_psi_qk_sq.max((psi * qk_here) * (psi * qk_here));
        rec.sup_psi2_lambda_max = rec.sup_psi2_lambda_max.max(psi * psi * lam_max);
        rec.sup_qk_sq = rec.sup_qk_sq.max(qk_here * qk_here);
        rec.sup_upsilon = rec.sup_upsilon.max(ev.geom.upsilon);
        rec.sup_psi2_grad_a = rec.sup_psi2_grad_a.max(psi * psi * grad_a2);
    }
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    // The suprema of upsilon and Q_k over {u < M} are attained at the level
    // set {u = M}; interpolating both to the exact crossing keeps the scan
    // second-order in the spacing (the nodewise sup alone moves with the
    // grid by O(h)).
    let eval_q = |ev: &FieldEval| -> Result<f64> {
        if k == state.k {
            Ok(ev.qk)
        } else {
            symfun::qk(&lambda_of(state, &ev.geom), k)
        }
    };
    let mut cross = |a: usize, b: usize| -> Result<()> {
        let (ua, ub) = (state.u[a], state.u[b]);
        if !(ua.is_finite() && ub.is_finite()) || (ua < m_level) == (ub < m_level) {
            return Ok(());
        }
        let (Some(ea), Some(eb)) = (field[a].as_ref(), field[b].as_ref()) else {
            return Ok(());
        };
        let w = ((m_level - ua) / (ub - ua)).clamp(0.0, 1.0);
        let ups = ea.geom.upsilon + w * (eb.geom.upsilon - ea.geom.upsilon);
        let qa = eval_q(ea)?;
        let qb = eval_q(eb)?;
        let q = qa + w * (qb - qa);
        rec.sup_upsilon = rec.sup_upsilon.max(ups);
        rec.sup_qk_sq = rec.sup_qk_sq.max(q * q);
        Ok(())
    };
    match state.mode {
        GridMode::Radial => {
            for i in 0..state.nx - 1 {
                cross(i, i + 1)?;
            }
        }
        GridMode::Full2d => {
            for j in 0..state.ny {
                for i in 0..state.nx {
                    let flat = j * state.nx + i;
                    if i + 1 < state.nx {
                        cross(flat, flat + 1)?;
                    }
                    if j + 1 < state.ny {
                        cross(flat, flat + state.nx)?;
                    }
                }
            }
        }
    }
    Ok(rec)
}

/// |grad A|^2 by first differences of the h_ij field in grid coordinates.
/// Qualitative: coordinate derivatives, not covariant ones.
fn grad_a_squared(state: &GraphState, field: &Field, flat: usize) -> f64 {
    let h = state.spacing;
    match state.mode {
        GridMode::Radial => {
            if flat == 0 {
                // h components are even in r at a smooth pole
                return 0.0;
            }
            let here = field[flat].as_ref().unwrap().geom.h;
            let prev = field[flat - 1].as_ref().map(|e| e.geom.h);
            let next = if flat + 1 < state.nx {
                field[flat + 1].as_ref().map(|e| e.geom.h)
            } else {
                None
            };
            let diff = |c: usize| -> f64 {
                match (prev, next) {
                    (Some(p), Some(q)) => (q[c] - p[c]) / (2.0 * h),
                    (Some(p), None) => (here[c] - p[c]) / h,
                    (None, Some(q)) => (q[c] - here[c]) / h,
                    (None, None) => 0.0,
                }
            };
            let d_rr = diff(0);
            let d_tt = diff(1);
            d_rr * d_rr + (state.n - 1) as f64 * d_tt * d_tt
        }
        GridMode::Full2d => {
            let (i, j) = (flat % state.nx, flat / state.nx);
            let at = |ii: i64, jj: i64| -> Option<[f64; 3]> {
                if ii < 0 || jj < 0 || ii as usize >= state.nx || jj as usize >= state.ny {
                    None
                } else {
                    field[jj as usize * state.nx + ii as usize]
                        .as_ref()
                        .map(|e| e.geom.h)
                }
            };
            let here = field[flat].as_ref().unwrap().geom.h;
            let diff = |a: Option<[f64; 3]>, b: Option<[f64; 3]>, c: usize| -> f64 {
                match (a, b) {
                    (Some(p), Some(q)) => (q[c] - p[c]) / (2.0 * h),
                    (Some(p), None) => (here[c] - p[c]) / h,
                    (None, Some(q)) => (q[c] - here[c]) / h,
                    (None, None) => 0.0,
                }
            };
            // mixed component counts twice in |A|^2
            let weights = [1.0, 2.0, 1.0];
            let mut total = 0.0;
            for c in 0..3 {
                let dx = diff(at(i as i64 - 1, j as i64), at(i as i64 + 1, j as i64), c);
                let dy = diff(at(i as i64, j as i64 - 1), at(i as i64, j as i64 + 1), c);
                total += weights[c] * (dx * dx + dy * dy);
            }
            total
        }
    }
}
