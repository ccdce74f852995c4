//! Text persistence: state snapshots and monitor-series CSV.
//!
//! Snapshots are a fixed-order text header followed by one value per line;
//! floats are printed with 17 significant digits, so save -> load -> save is
//! byte-identical. The CSV schema is one metadata comment, a header row
//! naming every monitor field in order, then one row per monitor event.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{GraphState, GridMode};
use crate::monitors::{MonitorRow, MonitorSeries};
use crate::supportfn::{SphereGrid, SupportState};

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("bad float `{s}`: {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|e| Error::Format(format!("bad integer `{s}`: {e}")))
}

pub fn graph_to_string(state: &GraphState) -> String {
    let mut out = String::new();
    out.push_str("qkflow snapshot 1\n");
    out.push_str("kind=graph\n");
    let mode = match state.mode {
        GridMode::Radial => "radial",
        GridMode::Full2d => "full2d",
    };
    let _ = writeln!(out, "mode={mode}");
    let _ = writeln!(out, "n={}", state.n);
    let _ = writeln!(out, "k={}", state.k);
    let _ = writeln!(out, "t={}", fmt_f64(state.t));
    let _ = writeln!(out, "spacing={}", fmt_f64(state.spacing));
    let _ = writeln!(out, "nx={}", state.nx);
    let _ = writeln!(out, "ny={}", state.ny);
    let _ = writeln!(out, "clip={}", fmt_f64(state.clip_ceiling));
    out.push_str("data\n");
    for v in &state.u {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out
}

pub fn support_to_string(state: &SupportState) -> String {
    let mut out = String::new();
    out.push_str("qkflow snapshot 1\n");
    out.push_str("kind=support\n");
    let grid = match state.grid {
        SphereGrid::Circle => "circle",
        SphereGrid::AxisymmetricSphere => "axisym",
    };
    let _ = writeln!(out, "grid={grid}");
    let _ = writeln!(out, "n={}", state.n);
    let _ = writeln!(out, "t={}", fmt_f64(state.t));
    let _ = writeln!(out, "origin={}", fmt_f64(state.origin_height));
    let _ = writeln!(out, "nodes={}", state.s.len());
    out.push_str("data\n");
    for v in &state.s {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out
}

struct Header<'a> {
    fields: Vec<(&'a str, &'a str)>,
    data: Vec<&'a str>,
}

fn split_snapshot(text: &str) -> Result<Header<'_>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("qkflow snapshot 1") => {}
        other => {
            return Err(Error::Format(format!(
                "unrecognized snapshot signature {other:?}"
            )))
        }
    }
    let mut fields = Vec::new();
    for line in lines.by_ref() {
        if line == "data" {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
        fields.push((key, value));
    }
    Ok(Header {
        fields,
        data: lines.collect(),
    })
}

impl<'a> Header<'a> {
    fn get(&self, key: &str) -> Result<&'a str> {
        self.fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Format(format!("missing header field `{key}`")))
    }
}

pub fn graph_from_str(text: &str) -> Result<GraphState> {
    let h = split_snapshot(text)?;
    if h.get("kind")? != "graph" {
        return Err(Error::Format("not a graph snapshot".into()));
    }
    let mode = match h.get("mode")? {
        "radial" => GridMode::Radial,
        "full2d" => GridMode::Full2d,
        other => return Err(Error::Format(format!("unknown mode `{other}`"))),
    };
    let nx = parse_usize(h.get("nx")?)?;
    let ny = parse_usize(h.get("ny")?)?;
    let u: Result<Vec<f64>> = h.data.iter().map(|l| parse_f64(l)).collect();
    let u = u?;
    if u.len() != nx * ny {
        return Err(Error::Format(format!(
            "expected {} values, found {}",
            nx * ny,
            u.len()
        )));
    }
    Ok(GraphState {
        mode,
        u,
        nx,
        ny,
        spacing: parse_f64(h.get("spacing")?)?,
        n: parse_usize(h.get("n")?)?,
        k: parse_usize(h.get("k")?)?,
        t: parse_f64(h.get("t")?)?,
        clip_ceiling: parse_f64(h.get("clip")?)?,
    })
}

pub fn support_from_str(text: &str) -> Result<SupportState> {
    let h = split_snapshot(text)?;
    if h.get("kind")? != "support" {
        return Err(Error::Format("not a support snapshot".into()));
    }
    let grid = match h.get("grid")? {
        "circle" => SphereGrid::Circle,
        "axisym" => SphereGrid::AxisymmetricSphere,
        other => return Err(Error::Format(format!("unknown grid `{other}`"))),
    };
    let nodes = parse_usize(h.get("nodes")?)?;
    let s: Result<Vec<f64>> = h.data.iter().map(|l| parse_f64(l)).collect();
    let s = s?;
    if s.len() != nodes {
        return Err(Error::Format(format!(
            "expected {nodes} values, found {}",
            s.len()
        )));
    }
    let mut state = SupportState::new(grid, s, parse_f64(h.get("origin")?)?);
    state.n = parse_usize(h.get("n")?)?;
    state.t = parse_f64(h.get("t")?)?;
    Ok(state)
}

pub fn save_graph(state: &GraphState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, graph_to_string(state))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<GraphState> {
    graph_from_str(&std::fs::read_to_string(path)?)
}

pub fn save_support(state: &SupportState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, support_to_string(state))?;
    Ok(())
}

pub fn load_support(path: impl AsRef<Path>) -> Result<SupportState> {
    support_from_str(&std::fs::read_to_string(path)?)
}

const CSV_HEADER: &str = "t,supPsiUpsilon,infPsiInvQk,supPsiQkSq,speedBoundRHS,supPsi2LambdaMax,curvatureBoundRHS,supPsi2GradA,runningSupQM_upsilon4,runningSupQM_QkSq,dtUsed";

pub fn series_to_csv(series: &MonitorSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# qkflow-series n={} k={} m={}",
        series.n,
        series.k,
        fmt_f64(series.m_level)
    );
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &series.rows {
        let vals = [
            r.t,
            r.sup_psi_upsilon,
            r.inf_psi_inv_qk,
            r.sup_psi_qk_sq,
            r.speed_bound_rhs,
            r.sup_psi2_lambda_max,
            r.curvature_bound_rhs,
            r.sup_psi2_grad_a,
            r.running_sup_qm_upsilon4,
            r.running_sup_qm_qk_sq,
            r.dt_used,
        ];
        let line: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn series_from_csv(text: &str) -> Result<MonitorSeries> {
    let mut lines = text.lines();
    let meta = lines
        .next()
        .ok_or_else(|| Error::Format("empty series file".into()))?;
    let meta = meta
        .strip_prefix("# qkflow-series ")
        .ok_or_else(|| Error::Format("missing series metadata line".into()))?;
    let mut n = None;
    let mut k = None;
    let mut m = None;
    for part in meta.split_whitespace() {
        if let Some(v) = part.strip_prefix("n=") {
            n = Some(parse_usize(v)?);
        } else if let Some(v) = part.strip_prefix("k=") {
            k = Some(parse_usize(v)?);
        } else if let Some(v) = part.strip_prefix("m=") {
            m = Some(parse_f64(v)?);
        }
    }
    let (Some(n), Some(k), Some(m)) = (n, k, m) else {
        return Err(Error::Format("incomplete series metadata".into()));
    };
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Format(format!("unexpected CSV header {other:?}"))),
    }
    let mut series = MonitorSeries::new(n, k, m);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>> = line.split(',').map(parse_f64).collect();
        let v = vals?;
        if v.len() != 11 {
            return Err(Error::Format(format!(
                "expected 11 columns, found {}",
                v.len()
            )));
        }
        series.rows.push(MonitorRow {
            t: v[0],
            sup_psi_upsilon: v[1],
            inf_psi_inv_qk: v[2],
            sup_psi_qk_sq: v[3],
            speed_bound_rhs: v[4],
            sup_psi2_lambda_max: v[5],
            curvature_bound_rhs: v[6],
            sup_psi2_grad_a: v[7],
            running_sup_qm_upsilon4: v[8],
            running_sup_qm_qk_sq: v[9],
            dt_used: v[10],
        });
    }
    Ok(series)
}

pub fn save_series(series: &MonitorSeries, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, series_to_csv(series))?;
    Ok(())
}

pub fn load_series(path: impl AsRef<Path>) -> Result<MonitorSeries> {
    series_from_csv(&std::fs::read_to_string(path)?)
}
