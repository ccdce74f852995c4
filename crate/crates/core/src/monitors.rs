//! Assembles per-run verdicts: each a priori estimate's left side against
//! its right side, through time, with PASS/FAIL and margins.
//!
//! The right-hand sides reference suprema over the space-time region
//! Q_M = { height <= M }; those are maintained as running maxima over the
//! monitored scans, which only ever enlarges the right side, so a PASS is
//! meaningful.

use crate::geometry::ScanRecord;

/// Default tolerances pinned by the acceptance criteria.
pub const TOL_GRADIENT: f64 = 1e-3;
pub const TOL_SPEED_LOWER: f64 = 1e-3;
pub const TOL_SPEED_UPPER: f64 = 1e-2;
pub const TOL_CURVATURE: f64 = 1e-2;
/// Boundedness proxy for the first derivative monitor (the sharp constant is
/// not constructive): the series may grow by at most this factor.
pub const DERIVATIVE_GROWTH_FACTOR: f64 = 10.0;
/// Absolute floor for the derivative monitor when the initial value is zero
/// (e.g. data with constant second fundamental form).
const DERIVATIVE_ABS_FLOOR: f64 = 1e-9;

/// One monitored instant.
#[derive(Debug, Clone, Copy)]
pub struct MonitorRow {
    pub t: f64,
    pub sup_psi_upsilon: f64,
    pub inf_psi_inv_qk: f64,
    pub sup_psi_qk_sq: f64,
    pub speed_bound_rhs: f64,
    pub sup_psi2_lambda_max: f64,
    pub curvature_bound_rhs: f64,
    pub sup_psi2_grad_a: f64,
    pub running_sup_qm_upsilon4: f64,
    pub running_sup_qm_qk_sq: f64,
    pub dt_used: f64,
}

/// The full per-run record of a priori quantities.
#[derive(Debug, Clone)]
pub struct MonitorSeries {
    pub n: usize,
    pub k: usize,
    pub m_level: f64,
    pub rows: Vec<MonitorRow>,
}

impl MonitorSeries {
    pub fn new(n: usize, k: usize, m_level: f64) -> Self {
        Self {
            n,
            k,
            m_level,
            rows: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Named physical columns, in the serialization order.
    pub fn columns(&self) -> Vec<(&'static str, Vec<f64>)> {
        let col = |f: fn(&MonitorRow) -> f64| self.rows.iter().map(f).collect::<Vec<_>>();
        vec![
            ("t", col(|r| r.t)),
            ("supPsiUpsilon", col(|r| r.sup_psi_upsilon)),
            ("infPsiInvQk", col(|r| r.inf_psi_inv_qk)),
            ("supPsiQkSq", col(|r| r.sup_psi_qk_sq)),
            ("speedBoundRHS", col(|r| r.speed_bound_rhs)),
            ("supPsi2LambdaMax", col(|r| r.sup_psi2_lambda_max)),
            ("curvatureBoundRHS", col(|r| r.curvature_bound_rhs)),
            ("supPsi2GradA", col(|r| r.sup_psi2_grad_a)),
            ("runningSupQM_upsilon4", col(|r| r.running_sup_qm_upsilon4)),
            ("runningSupQM_QkSq", col(|r| r.running_sup_qm_qk_sq)),
            ("dtUsed", col(|r| r.dt_used)),
        ]
    }
}

/// Accumulates scan records into monitor rows, maintaining the running
/// space-time suprema over Q_M and building the estimate right-hand sides.
#[derive(Debug)]
pub struct RowBuilder {
    series: MonitorSeries,
    running_upsilon: f64,
    running_qk_sq: f64,
    sup_psi_qk_sq_at_0: f64,
    sup_psi2_lambda_max_at_0: f64,
}

impl RowBuilder {
    pub fn new(n: usize, k: usize, m_level: f64) -> Self {
        Self {
            series: MonitorSeries::new(n, k, m_level),
            running_upsilon: 0.0,
            running_qk_sq: 0.0,
            sup_psi_qk_sq_at_0: f64::NAN,
            sup_psi2_lambda_max_at_0: f64::NAN,
        }
    }

    pub fn push(&mut self, t: f64, scan: &ScanRecord, dt_used: f64) {
        if let Some(last) = self.series.rows.last() {
            debug_assert!(t > last.t, "monitor times must increase");
        }
        self.running_upsilon = self.running_upsilon.max(scan.sup_upsilon);
        self.running_qk_sq = self.running_qk_sq.max(scan.sup_qk_sq);
        if self.series.rows.is_empty() {
            self.sup_psi_qk_sq_at_0 = scan.sup_psi_qk_sq;
            self.sup_psi2_lambda_max_at_0 = scan.sup_psi2_lambda_max;
        }
        let n = self.series.n as f64;
        let ups4 = self.running_upsilon.powi(4);
        let ups2 = self.running_upsilon.powi(2);
        let speed_rhs = (10.0 * n * n * ups4).max(2.0 * ups2 * self.sup_psi_qk_sq_at_0);
        let curvature_rhs = (2.0 * n * t * self.running_qk_sq).exp()
            * (5.0 * self.series.m_level).max(self.sup_psi2_lambda_max_at_0);
        self.series.rows.push(MonitorRow {
            t,
            sup_psi_upsilon: scan.sup_psi_upsilon,
            inf_psi_inv_qk: scan.inf_psi_inv_qk,
            sup_psi_qk_sq: scan.sup_psi_qk_sq,
            speed_bound_rhs: speed_rhs,
            sup_psi2_lambda_max: scan.sup_psi2_lambda_max,
            curvature_bound_rhs: curvature_rhs,
            sup_psi2_grad_a: scan.sup_psi2_grad_a,
            running_sup_qm_upsilon4: ups4,
            running_sup_qm_qk_sq: self.running_qk_sq,
            dt_used,
        });
    }

    pub fn finish(self) -> MonitorSeries {
        self.series
    }

    pub fn series(&self) -> &MonitorSeries {
        &self.series
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: &'static str,
    pub pass: bool,
    /// Worst relative margin observed (positive = violation size).
    pub margin: f64,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: margin {:.3e} ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.margin,
            self.detail
        )
    }
}

/// Gradient estimate: sup psi*upsilon stays below its initial value.
pub fn verdict_gradient(series: &MonitorSeries, tol: f64) -> Verdict {
    assert!(series.rows.len() >= 2, "need at least two rows");
    let initial = series.rows[0].sup_psi_upsilon;
    let worst = series
        .rows
        .iter()
        .map(|r| r.sup_psi_upsilon)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = (worst - initial) / initial.abs().max(f64::MIN_POSITIVE);
    Verdict {
        name: "gradient",
        pass: worst <= (1.0 + tol) * initial,
        margin,
        detail: format!("max sup(psi*upsilon) {worst:.6e} vs initial {initial:.6e}, tol {tol:.1e}"),
    }
}

/// Speed lower bound: inf psi^-1 Q_k stays above its initial value.
pub fn verdict_speed_lower(series: &MonitorSeries, tol: f64) -> Verdict {
    assert!(series.rows.len() >= 2, "need at least two rows");
    let initial = series.rows[0].inf_psi_inv_qk;
    let worst = series
        .rows
        .iter()
        .map(|r| r.inf_psi_inv_qk)
        .fold(f64::INFINITY, f64::min);
    let margin = (initial - worst) / initial.abs().max(f64::MIN_POSITIVE);
    Verdict {
        name: "speed-lower",
        pass: worst >= (1.0 - tol) * initial,
        margin,
        detail: format!("min inf(Q_k/psi) {worst:.6e} vs initial {initial:.6e}, tol {tol:.1e}"),
    }
}

/// Speed upper bound: (psi Q_k)^2 below the localized maximum-principle RHS.
pub fn verdict_speed_upper(series: &MonitorSeries, tol: f64) -> Verdict {
    let mut margin = f64::NEG_INFINITY;
    let mut pass = true;
    for r in &series.rows {
        let m = (r.sup_psi_qk_sq - r.speed_bound_rhs) / r.speed_bound_rhs.abs().max(f64::MIN_POSITIVE);
        margin = margin.max(m);
        if r.sup_psi_qk_sq > (1.0 + tol) * r.speed_bound_rhs {
            pass = false;
        }
    }
    Verdict {
        name: "speed-upper",
        pass,
        margin,
        detail: format!("worst (psi Q_k)^2 / RHS excess, tol {tol:.1e}"),
    }
}

/// Curvature estimate: psi^2 lambda_max below exp(2nt sup Q_k^2) max(5M, initial).
pub fn verdict_curvature(series: &MonitorSeries, m_level: f64, tol: f64) -> Verdict {
    let _ = m_level; // the RHS column already encodes M
    let mut margin = f64::NEG_INFINITY;
    let mut pass = true;
    for r in &series.rows {
        let m = (r.sup_psi2_lambda_max - r.curvature_bound_rhs)
            / r.curvature_bound_rhs.abs().max(f64::MIN_POSITIVE);
        margin = margin.max(m);
        if r.sup_psi2_lambda_max > (1.0 + tol) * r.curvature_bound_rhs {
            pass = false;
        }
    }
    Verdict {
        name: "curvature",
        pass,
        margin,
        detail: format!("worst psi^2 lambda_max / RHS excess, tol {tol:.1e}"),
    }
}

/// Boundedness witness for psi^2 |grad A|^2: stays within a fixed factor of
/// its initial value.
pub fn verdict_derivative(series: &MonitorSeries) -> Verdict {
    let initial = series.rows[0].sup_psi2_grad_a;
    let cap = DERIVATIVE_GROWTH_FACTOR * initial.max(DERIVATIVE_ABS_FLOOR);
    let worst = series
        .rows
        .iter()
        .map(|r| r.sup_psi2_grad_a)
        .fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        name: "derivative",
        pass: worst <= cap,
        margin: worst / cap.max(f64::MIN_POSITIVE),
        detail: format!("max psi^2|grad A|^2 {worst:.6e} vs cap {cap:.6e}"),
    }
}

/// The five verdicts at their default tolerances.
pub fn standard_verdicts(series: &MonitorSeries) -> Vec<Verdict> {
    vec![
        verdict_gradient(series, TOL_GRADIENT),
        verdict_speed_lower(series, TOL_SPEED_LOWER),
        verdict_speed_upper(series, TOL_SPEED_UPPER),
        verdict_curvature(series, series.m_level, TOL_CURVATURE),
        verdict_derivative(series),
    ]
}
