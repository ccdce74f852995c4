//! Experiment configuration: named presets and a flat key=value file format
//! with bracketed sections. No structured-format dependency; files diff
//! cleanly.
//!
//! ```text
//! [run]
//! preset = cup-k2
//! t_end = 0.05        # explicit keys override the preset
//!
//! [output]
//! prefix = out/exp1
//! ```

use crate::error::{Error, Result};
use crate::flow::{RunConfig, StepControl};
use crate::geometry::{GridMode, InitialData};
use crate::oracle::BallSolution;
use crate::pipeline::ConstructionConfig;
use crate::verify::VerifyConfig;

/// Union of the per-subcommand configurations found in one file.
#[derive(Debug, Default)]
pub struct ExperimentConfig {
    pub run: Option<RunConfig>,
    pub construct: Option<ConstructionConfig>,
    pub verify: Option<VerifyConfig>,
    pub output_prefix: Option<String>,
}

pub const RUN_PRESETS: &[&str] = &["paraboloid", "cup-k2", "hemisphere"];
pub const CONSTRUCTION_PRESETS: &[&str] = &["flat-construction"];

/// Built-in graph-flow experiments. Every acceptance scenario is runnable by
/// name.
pub fn preset_run(name: &str) -> Option<RunConfig> {
    match name {
        "paraboloid" => Some(RunConfig {
            name: name.into(),
            initial: InitialData::Paraboloid,
            mode: GridMode::Radial,
            n: 2,
            k: 1,
            grid: 256,
            extent: 2.0,
            m_level: 1.0,
            clip_ceiling: 10.0,
            ctrl: StepControl {
                cfl_safety: 0.2,
                dt_max: 1e-4,
                t_end: 0.1,
                monitor_every: 1000,
            },
            seed: 0,
            oracle_ball: Some(BallSolution::new(1.0, 1.0, 2, 1)),
            extra_monitor_k: vec![],
            output_prefix: None,
        }),
        "cup-k2" => Some(RunConfig {
            name: name.into(),
            initial: InitialData::Cup,
            mode: GridMode::Radial,
            n: 2,
            k: 2,
            grid: 192,
            extent: 0.9,
            m_level: 1.0,
            clip_ceiling: 10.0,
            ctrl: StepControl {
                cfl_safety: 0.2,
                dt_max: 1e-4,
                t_end: 0.05,
                monitor_every: 2000,
            },
            seed: 0,
            oracle_ball: Some(BallSolution::new(0.5, 0.5, 2, 2)),
            extra_monitor_k: vec![],
            output_prefix: None,
        }),
        "hemisphere" => Some(RunConfig {
            name: name.into(),
            initial: InitialData::Hemisphere { r: 1.0 },
            mode: GridMode::Radial,
            n: 2,
            k: 1,
            grid: 256,
            extent: 0.97,
            m_level: 0.5,
            clip_ceiling: 10.0,
            ctrl: StepControl {
                cfl_safety: 0.2,
                dt_max: 1e-4,
                t_end: 0.02,
                monitor_every: 500,
            },
            seed: 0,
            oracle_ball: Some(BallSolution::new(1.0, 1.0, 2, 1)),
            extra_monitor_k: vec![],
            output_prefix: None,
        }),
        _ => None,
    }
}

pub fn preset_construction(name: &str) -> Option<ConstructionConfig> {
    match name {
        "flat-construction" => Some(ConstructionConfig {
            name: name.into(),
            initial: InitialData::Flat,
            initial_offset: 0.0,
            n: 2,
            k: 2,
            graph_grid: 192,
            extent: 1.0,
            support_grid: 193,
            j_list: vec![2.0, 4.0, 8.0],
            epsilon_list: vec![0.1],
            pre_smooth_time: Some(0.125),
            flow_horizon: 1.0,
            monitor_count: 10,
            monitor_m: 1.8,
            cfl_safety: 0.2,
            dt_max: 1e-3,
            output_prefix: None,
        }),
        _ => None,
    }
}

fn parse_initial(name: &str, quartic_c: f64, hemisphere_r: f64) -> Result<InitialData> {
    match name {
        "paraboloid" => Ok(InitialData::Paraboloid),
        "paraboloid-quartic" => Ok(InitialData::ParaboloidQuartic { c: quartic_c }),
        "cup" => Ok(InitialData::Cup),
        "hemisphere" => Ok(InitialData::Hemisphere { r: hemisphere_r }),
        "flat" => Ok(InitialData::Flat),
        other => Err(Error::Config(format!("unknown initial data `{other}`"))),
    }
}

/// One parsed section: ordered key -> value pairs.
#[derive(Debug, Default)]
struct Section {
    entries: Vec<(String, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("bad value for {key}: {e}"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("bad value for {key}: {e}"))),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::Config(format!("bad value for {key}: {e}"))),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let parsed: std::result::Result<Vec<f64>, _> =
                    v.split(',').map(|p| p.trim().parse()).collect();
                parsed
                    .map(Some)
                    .map_err(|e| Error::Config(format!("bad list for {key}: {e}")))
            }
        }
    }
}

fn split_sections(text: &str) -> Result<Vec<(String, Section)>> {
    let mut sections: Vec<(String, Section)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: bad section", lineno + 1)))?;
            sections.push((name.trim().to_string(), Section::default()));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let Some((_, section)) = sections.last_mut() else {
            return Err(Error::Config(format!(
                "line {}: key outside of any [section]",
                lineno + 1
            )));
        };
        section
            .entries
            .push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(sections)
}

fn run_from_section(s: &Section) -> Result<RunConfig> {
    let mut cfg = match s.get("preset") {
        Some(name) => preset_run(name)
            .ok_or_else(|| Error::Config(format!("unknown run preset `{name}`")))?,
        None => RunConfig {
            name: "custom".into(),
            initial: InitialData::Paraboloid,
            mode: GridMode::Radial,
            n: 2,
            k: 1,
            grid: 128,
            extent: 2.0,
            m_level: 1.0,
            clip_ceiling: 10.0,
            ctrl: StepControl::default(),
            seed: 0,
            oracle_ball: None,
            extra_monitor_k: vec![],
            output_prefix: None,
        },
    };
    if let Some(v) = s.get("initial") {
        let qc = s.f64_or("quartic_c", 0.05)?;
        let hr = s.f64_or("hemisphere_r", 1.0)?;
        cfg.initial = parse_initial(v, qc, hr)?;
    }
    if let Some(v) = s.get("mode") {
        cfg.mode = match v {
            "radial" => GridMode::Radial,
            "full2d" => GridMode::Full2d,
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        };
    }
    cfg.n = s.usize_or("n", cfg.n)?;
    cfg.k = s.usize_or("k", cfg.k)?;
    cfg.grid = s.usize_or("grid", cfg.grid)?;
    cfg.extent = s.f64_or("extent", cfg.extent)?;
    cfg.m_level = s.f64_or("m", cfg.m_level)?;
    cfg.clip_ceiling = s.f64_or("clip_ceiling", cfg.clip_ceiling)?;
    cfg.ctrl.cfl_safety = s.f64_or("cfl_safety", cfg.ctrl.cfl_safety)?;
    cfg.ctrl.dt_max = s.f64_or("dt_max", cfg.ctrl.dt_max)?;
    cfg.ctrl.t_end = s.f64_or("t_end", cfg.ctrl.t_end)?;
    cfg.ctrl.monitor_every = s.usize_or("monitor_every", cfg.ctrl.monitor_every)?;
    cfg.seed = s.u64_or("seed", cfg.seed)?;
    if let Some(r0) = s.get("ball_r0") {
        let r0: f64 = r0
            .parse()
            .map_err(|e| Error::Config(format!("bad ball_r0: {e}")))?;
        let center = s.f64_or("ball_center", r0)?;
        cfg.oracle_ball = Some(BallSolution::new(center, r0, cfg.n, cfg.k));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn construction_from_section(s: &Section) -> Result<ConstructionConfig> {
    let mut cfg = match s.get("preset") {
        Some(name) => preset_construction(name)
            .ok_or_else(|| Error::Config(format!("unknown construction preset `{name}`")))?,
        None => preset_construction("flat-construction").unwrap(),
    };
    if let Some(v) = s.get("initial") {
        let qc = s.f64_or("quartic_c", 0.05)?;
        let hr = s.f64_or("hemisphere_r", 1.0)?;
        cfg.initial = parse_initial(v, qc, hr)?;
    }
    cfg.initial_offset = s.f64_or("initial_offset", cfg.initial_offset)?;
    cfg.n = s.usize_or("n", cfg.n)?;
    cfg.k = s.usize_or("k", cfg.k)?;
    cfg.graph_grid = s.usize_or("graph_grid", cfg.graph_grid)?;
    cfg.extent = s.f64_or("extent", cfg.extent)?;
    cfg.support_grid = s.usize_or("support_grid", cfg.support_grid)?;
    if let Some(list) = s.f64_list("j_list")? {
        cfg.j_list = list;
    }
    if let Some(list) = s.f64_list("epsilon_list")? {
        cfg.epsilon_list = list;
    }
    if let Some(v) = s.get("pre_smooth_time") {
        cfg.pre_smooth_time = Some(
            v.parse()
                .map_err(|e| Error::Config(format!("bad pre_smooth_time: {e}")))?,
        );
    }
    cfg.flow_horizon = s.f64_or("flow_horizon", cfg.flow_horizon)?;
    cfg.monitor_count = s.usize_or("monitor_count", cfg.monitor_count)?;
    cfg.monitor_m = s.f64_or("monitor_m", cfg.monitor_m)?;
    cfg.cfl_safety = s.f64_or("cfl_safety", cfg.cfl_safety)?;
    cfg.dt_max = s.f64_or("dt_max", cfg.dt_max)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
    let mut out = ExperimentConfig::default();
    for (name, section) in split_sections(text)? {
        match name.as_str() {
            "run" => out.run = Some(run_from_section(&section)?),
            "construct" => out.construct = Some(construction_from_section(&section)?),
            "verify" => {
                out.verify = Some(VerifyConfig {
                    samples: section.usize_or("samples", 10_000)?,
                    nmax: section.usize_or("nmax", 6)?,
                    seed: section.u64_or("seed", 0x5eed)?,
                })
            }
            "output" => {
                out.output_prefix = section.get("prefix").map(|s| s.to_string());
            }
            other => {
                return Err(Error::Config(format!("unknown section `[{other}]`")));
            }
        }
    }
    Ok(out)
}

pub fn parse_file(path: impl AsRef<std::path::Path>) -> Result<ExperimentConfig> {
    parse_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_exist_and_validate() {
        for name in RUN_PRESETS {
            let cfg = preset_run(name).unwrap();
            cfg.validate().unwrap();
        }
        for name in CONSTRUCTION_PRESETS {
            let cfg = preset_construction(name).unwrap();
            cfg.validate().unwrap();
        }
        assert!(preset_run("nope").is_none());
    }

    #[test]
    fn parse_run_with_overrides() {
        let text = "\
# experiment
[run]
preset = cup-k2
t_end = 0.01     # shorter horizon
grid = 64

[output]
prefix = out/x
";
        let cfg = parse_str(text).unwrap();
        let run = cfg.run.unwrap();
        assert_eq!(run.k, 2);
        assert_eq!(run.grid, 64);
        assert!((run.ctrl.t_end - 0.01).abs() < 1e-15);
        assert_eq!(cfg.output_prefix.as_deref(), Some("out/x"));
    }

    #[test]
    fn parse_construct_and_verify() {
        let text = "\
[construct]
preset = flat-construction
j_list = 2, 4
flow_horizon = 0.3
monitor_count = 4

[verify]
samples = 100
nmax = 3
seed = 9
";
        let cfg = parse_str(text).unwrap();
        let c = cfg.construct.unwrap();
        assert_eq!(c.j_list, vec![2.0, 4.0]);
        assert_eq!(c.monitor_count, 4);
        let v = cfg.verify.unwrap();
        assert_eq!(v.samples, 100);
        assert_eq!(v.nmax, 3);
    }

    #[test]
    fn invalid_inputs_are_config_errors() {
        assert!(matches!(parse_str("x = 1\n"), Err(Error::Config(_))));
        assert!(matches!(
            parse_str("[run]\npreset = nope\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_str("[run]\npreset = paraboloid\nk = 5\n"),
            Err(Error::Config(_))
        ));
        // M at or below the initial minimum is rejected
        assert!(matches!(
            parse_str("[run]\npreset = paraboloid\nm = -1\n"),
            Err(Error::Config(_))
        ));
    }
}
