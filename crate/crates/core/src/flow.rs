//! Time integration of the graph flow u_t = upsilon * Q_k(lambda(u)).
//!
//! For a convex graph opening upward the inward normal points upward, so the
//! normal speed Q_k scalarizes to u_t = upsilon Q_k. Stepping is forward
//! Euler with a curvature-aware CFL budget justified by the uniform bound
//! D_i Q_k <= 1: every accepted step satisfies
//!
//! ```text
//! dt <= cfl_safety * spacing^2 / (2 n * upsilon_max^2 * maxD),
//! ```
//!
//! where `upsilon_max` and `maxD = max_i D_i Q_k` are scan maxima over the
//! support of psi. A step that breaks discrete convexity is rejected and
//! retried with half the step, rather than clamped: silent clamping would
//! mask exactly the violations this crate exists to witness.

use crate::error::{Error, Result};
use crate::geometry::{self, Field, GraphState, GridMode, InitialData};
use crate::monitors::{MonitorSeries, RowBuilder};
use crate::oracle::{self, BallSolution};
use crate::snapshot;

/// Maximum dt halvings before a step aborts the run.
const MAX_STEP_RETRIES: usize = 20;

/// Step-size and monitoring control.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Safety factor in (0, 1] for the CFL budget.
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Monitor rows are appended every this many accepted steps.
    pub monitor_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl_safety: 0.2,
            dt_max: 1e-3,
            t_end: 0.1,
            monitor_every: 100,
        }
    }
}

/// A complete graph-flow experiment description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub initial: InitialData,
    pub mode: GridMode,
    pub n: usize,
    pub k: usize,
    /// Grid intervals.
    pub grid: usize,
    /// Radial extent, or half-width of the full2d square.
    pub extent: f64,
    /// Cutoff level M.
    pub m_level: f64,
    pub clip_ceiling: f64,
    pub ctrl: StepControl,
    pub seed: u64,
    /// Inscribed-ball comparison oracle, checked at monitor times.
    pub oracle_ball: Option<BallSolution>,
    /// Additional speed indices to monitor along the run (the scan evaluates
    /// Q_j for these j on the same support), e.g. Q_2 along a mean curvature
    /// flow.
    pub extra_monitor_k: Vec<usize>,
    pub output_prefix: Option<String>,
}

impl RunConfig {
    pub fn build_state(&self) -> GraphState {
        match self.mode {
            GridMode::Radial => GraphState::radial(
                self.n,
                self.k,
                self.grid,
                self.extent,
                self.clip_ceiling,
                |r| self.initial.eval(r),
            ),
            GridMode::Full2d => GraphState::full2d(
                self.k,
                self.grid,
                self.extent,
                self.clip_ceiling,
                |x, y| self.initial.eval(x.hypot(y)),
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > self.n {
            return Err(Error::Config(format!(
                "require 1 <= k <= n, got k={} n={}",
                self.k, self.n
            )));
        }
        if self.grid < 16 {
            return Err(Error::Config(format!("grid size {} < 16", self.grid)));
        }
        if self.ctrl.monitor_every == 0 {
            return Err(Error::Config("monitor_every must be >= 1".into()));
        }
        if !(self.ctrl.cfl_safety > 0.0 && self.ctrl.cfl_safety <= 1.0) {
            return Err(Error::Config("cfl_safety must lie in (0, 1]".into()));
        }
        if self.mode == GridMode::Full2d && self.n != 2 {
            return Err(Error::Config("full2d mode forces n = 2".into()));
        }
        if let Some(&j) = self
            .extra_monitor_k
            .iter()
            .find(|&&j| j < 1 || j > self.n)
        {
            return Err(Error::Config(format!(
                "extra monitor index {j} outside 1..={}",
                self.n
            )));
        }
        let min_u = self.build_state().min_height();
        if self.m_level <= min_u {
            return Err(Error::Config(format!(
                "M = {} must exceed the initial minimum {min_u}",
                self.m_level
            )));
        }
        Ok(())
    }
}

/// Enclosure sample against the configured comparison ball.
#[derive(Debug, Clone, Copy)]
pub struct EnclosureSample {
    pub t: f64,
    pub enclosed: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub series: MonitorSeries,
    /// One extra series per configured extra monitor index.
    pub extra_series: Vec<MonitorSeries>,
    pub final_state: GraphState,
    pub enclosure: Vec<EnclosureSample>,
}

/// CFL-limited step size from the current field.
fn cfl_dt(state: &GraphState, field: &Field, m_level: f64, ctrl: &StepControl) -> Result<f64> {
    let mut ups_max: f64 = 0.0;
    let mut max_d: f64 = 0.0;
    let mut support = 0usize;
    for (flat, ev) in field.iter().enumerate() {
        let Some(ev) = ev.as_ref() else { continue };
        if state.u[flat] >= m_level {
            continue;
        }
        support += 1;
        ups_max = ups_max.max(ev.geom.upsilon);
        max_d = max_d.max(ev.max_d);
    }
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    let h2 = state.spacing * state.spacing;
    let dt = ctrl.cfl_safety * h2 / (2.0 * state.n as f64 * ups_max * ups_max * max_d);
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config(format!("degenerate CFL step {dt}")));
    }
    Ok(dt.min(ctrl.dt_max))
}

/// Forward-Euler update into `next` (inactive nodes frozen).
fn apply_update(state: &GraphState, field: &Field, dt: f64, next: &mut GraphState) {
    next.u.clear();
    next.u.extend_from_slice(&state.u);
    for (flat, ev) in field.iter().enumerate() {
        if let Some(ev) = ev.as_ref() {
            next.u[flat] = state.u[flat] + dt * ev.geom.upsilon * ev.qk;
        }
    }
    next.t = state.t + dt;
    next.k = state.k;
}

/// One accepted step of the graph flow. Retries with halved dt when the
/// post-step convexity/admissibility check fails.
pub fn step_graph(state: &GraphState, ctrl: &StepControl) -> Result<GraphState> {
    let mut field: Field = Vec::new();
    geometry::compute_field(state, &mut field)?;
    // any M above the whole graph keeps the scan support global here; the
    // caller-facing run driver uses its configured M instead
    let mut dt = cfl_dt(state, &field, f64::INFINITY, ctrl)?;
    let remaining = ctrl.t_end - state.t;
    if remaining > 0.0 {
        dt = dt.min(remaining);
    }
    let mut next = state.clone();
    let mut scratch: Field = Vec::new();
    let mut last_err: Option<Error> = None;
    for _attempt in 0..=MAX_STEP_RETRIES {
        apply_update(state, &field, dt, &mut next);
        match validate_step(&next, &mut scratch, f64::INFINITY) {
            Ok(()) => return Ok(next),
            Err(e) => {
                last_err = Some(e);
                dt *= 0.5;
            }
        }
    }
    Err(Error::StepRejected {
        t: state.t,
        dt,
        attempts: MAX_STEP_RETRIES,
        detail: last_err.map(|e| e.to_string()).unwrap_or_default(),
    })
}

/// Post-step acceptance: speeds must stay defined on the active mask, the
/// update must be finite, and the support of psi must remain convex.
fn validate_step(trial: &GraphState, field: &mut Field, m_level: f64) -> Result<()> {
    if trial.u.iter().any(|v| v.is_nan()) {
        return Err(Error::Config("non-finite update".into()));
    }
    geometry::compute_field(trial, field)?;
    geometry::validate_support_convexity(trial, field, m_level)
}

/// One accepted step of the mean curvature flow (k forced to 1).
pub fn step_mcf(state: &GraphState, ctrl: &StepControl) -> Result<GraphState> {
    let mut mcf = state.clone();
    mcf.k = 1;
    step_graph(&mcf, ctrl)
}

fn check_initial_admissibility(state: &GraphState, field: &Field, m_level: f64) -> Result<()> {
    let mut support = 0usize;
    for (flat, ev) in field.iter().enumerate() {
        let Some(ev) = ev.as_ref() else { continue };
        if state.u[flat] >= m_level {
            continue;
        }
        support += 1;
        if !(ev.qk > 0.0) {
            return Err(Error::InadmissibleInitialData { node: flat });
        }
    }
    if support == 0 {
        return Err(Error::EmptySupport);
    }
    Ok(())
}

/// Integrate the configured graph flow to t_end, recording monitor rows and
/// oracle enclosure samples. On an unrecoverable step rejection the last
/// good state is dumped next to the configured output prefix.
pub fn run_graph_flow(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut state = cfg.build_state();
    let mut field: Field = Vec::new();
    geometry::compute_field(&state, &mut field)?;
    check_initial_admissibility(&state, &field, cfg.m_level)?;

    let mut builder = RowBuilder::new(cfg.n, cfg.k, cfg.m_level);
    let mut extra_builders: Vec<RowBuilder> = cfg
        .extra_monitor_k
        .iter()
        .map(|&j| RowBuilder::new(cfg.n, j, cfg.m_level))
        .collect();
    let scan = geometry::scan_field(&state, &field, cfg.m_level, state.k)?;
    builder.push(0.0, &scan, 0.0);
    for (bi, &j) in cfg.extra_monitor_k.iter().enumerate() {
        let scan_j = geometry::scan_field(&state, &field, cfg.m_level, j)?;
        extra_builders[bi].push(0.0, &scan_j, 0.0);
    }
    let mut enclosure = Vec::new();
    record_enclosure(cfg, &state, &mut enclosure)?;

    let mut next = state.clone();
    let mut scratch: Field = Vec::new();
    let mut steps = 0usize;

    while state.t < cfg.ctrl.t_end * (1.0 - 1e-12) {
        let mut dt = cfl_dt(&state, &field, cfg.m_level, &cfg.ctrl)?;
        dt = dt.min(cfg.ctrl.t_end - state.t);
        let mut accepted = false;
        let mut last_err: Option<Error> = None;
        for _attempt in 0..=MAX_STEP_RETRIES {
            apply_update(&state, &field, dt, &mut next);
            match validate_step(&next, &mut scratch, cfg.m_level) {
                Ok(()) => {
                    std::mem::swap(&mut state, &mut next);
                    std::mem::swap(&mut field, &mut scratch);
                    accepted = true;
                    break;
                }
                Err(e) => {
                    last_err = Some(e);
                    dt *= 0.5;
                }
            }
        }
        if !accepted {
            if let Some(prefix) = &cfg.output_prefix {
                let _ = snapshot::save_graph(&state, format!("{prefix}.abort.snapshot"));
            }
            return Err(Error::StepRejected {
                t: state.t,
                dt,
                attempts: MAX_STEP_RETRIES,
                detail: last_err.map(|e| e.to_string()).unwrap_or_default(),
            });
        }
        steps += 1;
        let at_end = state.t >= cfg.ctrl.t_end * (1.0 - 1e-12);
        if steps % cfg.ctrl.monitor_every == 0 || at_end {
            let scan = geometry::scan_field(&state, &field, cfg.m_level, state.k)?;
            builder.push(state.t, &scan, dt);
            for (bi, &j) in cfg.extra_monitor_k.iter().enumerate() {
                let scan_j = geometry::scan_field(&state, &field, cfg.m_level, j)?;
                extra_builders[bi].push(state.t, &scan_j, dt);
            }
            record_enclosure(cfg, &state, &mut enclosure)?;
        }
    }

    Ok(RunOutcome {
        series: builder.finish(),
        extra_series: extra_builders.into_iter().map(|b| b.finish()).collect(),
        final_state: state,
        enclosure,
    })
}

fn record_enclosure(
    cfg: &RunConfig,
    state: &GraphState,
    out: &mut Vec<EnclosureSample>,
) -> Result<()> {
    if let Some(ball) = &cfg.oracle_ball {
        let enclosed = oracle::enclosure_check(state, ball, state.t)?;
        out.push(EnclosureSample { t: state.t, enclosed });
    }
    Ok(())
}
