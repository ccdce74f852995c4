//! qkflow: experiment runner for the Q_k curvature flow laboratory.
//!
//! Subcommands:
//!   run        integrate a graph flow preset/config, verdict the estimates
//!   construct  run the closure construction (reflect/envelope/mollify/flow)
//!   verify     randomized sweeps over the curvature-algebra inequalities
//!   oracle     print closed-form shrinking-ball values
//!   report     re-evaluate verdicts from a saved monitor series
//!
//! Exit codes: 0 all checks PASS, 1 some check FAILED, 2 usage/runtime error.
//! QKFLOW_THREADS caps the worker-thread count.

use std::fmt::Write as _;
use std::process::ExitCode;

use qkflow_core::config::{self, ExperimentConfig};
use qkflow_core::error::Error;
use qkflow_core::monitors::{self, MonitorSeries};
use qkflow_core::oracle::BallSolution;
use qkflow_core::pipeline::{self, ConstructionReport};
use qkflow_core::snapshot;
use qkflow_core::verify::{self, VerifyConfig};
use qkflow_core::flow;

const USAGE: &str = "\
usage: qkflow <command> [options]

commands:
  run       --preset NAME | --config FILE  [--tEnd T] [--k K] [--grid N]
            [--seed S] [--out PREFIX]
  construct --preset NAME | --config FILE  [--out PREFIX]
  verify    [--samples N] [--nmax N] [--seed S]
  oracle    --ball R=<r> n=<n> k=<k> [--t T]
  report    --series FILE

presets: paraboloid, cup-k2, hemisphere (run); flat-construction (construct)
";

fn main() -> ExitCode {
    init_threads();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qkflow: error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("QKFLOW_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(args: &[String]) -> Result<bool, Error> {
    let Some(command) = args.first() else {
        return Err(Error::Config(USAGE.into()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "run" => cmd_run(rest),
        "construct" => cmd_construct(rest),
        "verify" => cmd_verify(rest),
        "oracle" => cmd_oracle(rest),
        "report" => cmd_report(rest),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(true)
        }
        other => Err(Error::Config(format!("unknown command `{other}`\n{USAGE}"))),
    }
}

/// Pull `--flag value` out of an argument list.
struct Flags<'a> {
    args: &'a [String],
}

impl<'a> Flags<'a> {
    fn new(args: &'a [String]) -> Self {
        Self { args }
    }

    fn value_of(&self, flag: &str) -> Option<&'a str> {
        self.args
            .iter()
            .position(|a| a == flag)
            .and_then(|i| self.args.get(i + 1))
            .map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, flag: &str) -> Result<Option<T>, Error>
    where
        T::Err: std::fmt::Display,
    {
        match self.value_of(flag) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("bad value for {flag}: {e}"))),
        }
    }
}

fn load_experiment(flags: &Flags) -> Result<ExperimentConfig, Error> {
    match flags.value_of("--config") {
        Some(path) => config::parse_file(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn ensure_parent(path: &str) -> Result<(), Error> {
    if let Some(parent) = std::path::Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn cmd_run(args: &[String]) -> Result<bool, Error> {
    let flags = Flags::new(args);
    let experiment = load_experiment(&flags)?;
    let mut cfg = match flags.value_of("--preset") {
        Some(name) => config::preset_run(name)
            .ok_or_else(|| Error::Config(format!("unknown run preset `{name}`")))?,
        None => experiment
            .run
            .ok_or_else(|| Error::Config("run: need --preset or a [run] section".into()))?,
    };
    if let Some(t) = flags.parse::<f64>("--tEnd")? {
        cfg.ctrl.t_end = t;
    }
    if let Some(k) = flags.parse::<usize>("--k")? {
        cfg.k = k;
        if let Some(ball) = cfg.oracle_ball.as_mut() {
            *ball = BallSolution::new(ball.center_height, ball.r0, cfg.n, k);
        }
    }
    if let Some(g) = flags.parse::<usize>("--grid")? {
        cfg.grid = g;
    }
    if let Some(s) = flags.parse::<u64>("--seed")? {
        cfg.seed = s;
    }
    if let Some(out) = flags.value_of("--out") {
        cfg.output_prefix = Some(out.to_string());
    } else if cfg.output_prefix.is_none() {
        cfg.output_prefix = experiment.output_prefix.clone();
    }
    cfg.validate()?;

    let outcome = flow::run_graph_flow(&cfg)?;
    let verdicts = monitors::standard_verdicts(&outcome.series);
    let enclosure_ok = outcome.enclosure.iter().all(|s| s.enclosed);

    let mut report = String::new();
    let _ = writeln!(report, "run {} (n={} k={})", cfg.name, cfg.n, cfg.k);
    for v in &verdicts {
        let _ = writeln!(report, "{v}");
    }
    if let Some(ball) = &cfg.oracle_ball {
        let _ = writeln!(
            report,
            "{} enclosure: inscribed ball R0={} at {} monitor times",
            if enclosure_ok { "PASS" } else { "FAIL" },
            ball.r0,
            outcome.enclosure.len()
        );
    }
    print!("{report}");

    if let Some(prefix) = &cfg.output_prefix {
        ensure_parent(prefix)?;
        snapshot::save_series(&outcome.series, format!("{prefix}.csv"))?;
        snapshot::save_graph(&outcome.final_state, format!("{prefix}.snapshot"))?;
        std::fs::write(format!("{prefix}.report.txt"), &report)?;
    }
    Ok(verdicts.iter().all(|v| v.pass) && enclosure_ok)
}

fn construction_report_text(report: &ConstructionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "construction: {} branches, horizon {:.6}, required survival {:.6}",
        report.branches.len(),
        report.horizon,
        report.required_time
    );
    for b in &report.branches {
        let _ = writeln!(
            out,
            "branch j={} eps={} presmooth={:.6}: survived_to={:.6} min_radius={:.6e} rows={}",
            b.j,
            b.eps,
            b.pre_smooth,
            b.survived_to,
            b.final_min_radius,
            b.series.rows.len()
        );
    }
    let _ = writeln!(
        out,
        "PASS nesting: worst gap {:.3e} (tol {:.1e})",
        report.nesting_worst_gap,
        pipeline::NESTING_TOL
    );
    for (label, sup) in &report.cauchy_sups {
        let _ = writeln!(out, "cauchy {label} = {sup:.6e}");
    }
    let _ = writeln!(
        out,
        "{} cauchy decrease in j",
        if report.cauchy_decreasing { "PASS" } else { "FAIL" }
    );
    out
}

fn cmd_construct(args: &[String]) -> Result<bool, Error> {
    let flags = Flags::new(args);
    let experiment = load_experiment(&flags)?;
    let mut cfg = match flags.value_of("--preset") {
        Some(name) => config::preset_construction(name)
            .ok_or_else(|| Error::Config(format!("unknown construction preset `{name}`")))?,
        None => experiment.construct.ok_or_else(|| {
            Error::Config("construct: need --preset or a [construct] section".into())
        })?,
    };
    if let Some(out) = flags.value_of("--out") {
        cfg.output_prefix = Some(out.to_string());
    } else if cfg.output_prefix.is_none() {
        cfg.output_prefix = experiment.output_prefix.clone();
    }
    if let Some(h) = flags.parse::<f64>("--horizon")? {
        cfg.flow_horizon = h;
    }
    cfg.validate()?;

    let report = pipeline::run_construction(&cfg)?;
    let text = construction_report_text(&report);
    print!("{text}");

    if let Some(prefix) = &cfg.output_prefix {
        ensure_parent(prefix)?;
        for b in &report.branches {
            snapshot::save_series(&b.series, format!("{prefix}.branch-j{}.csv", b.j))?;
            snapshot::save_support(&b.final_state, format!("{prefix}.branch-j{}.snapshot", b.j))?;
        }
        let mut limit = String::from("t,angle,s_limit\n");
        for (t, profile) in &report.limit_profiles {
            for (i, v) in profile.iter().enumerate() {
                let angle = report.branches[0].final_state.angle(i);
                let _ = writeln!(
                    limit,
                    "{},{},{}",
                    snapshot::fmt_f64(*t),
                    snapshot::fmt_f64(angle),
                    snapshot::fmt_f64(*v)
                );
            }
        }
        std::fs::write(format!("{prefix}.limit.csv"), limit)?;
        std::fs::write(format!("{prefix}.report.txt"), &text)?;
    }
    Ok(report.cauchy_decreasing)
}

fn cmd_verify(args: &[String]) -> Result<bool, Error> {
    let flags = Flags::new(args);
    let experiment = load_experiment(&flags)?;
    let mut cfg = experiment.verify.unwrap_or_default();
    if let Some(s) = flags.parse::<usize>("--samples")? {
        cfg.samples = s;
    }
    if let Some(n) = flags.parse::<usize>("--nmax")? {
        cfg.nmax = n;
    }
    if let Some(s) = flags.parse::<u64>("--seed")? {
        cfg.seed = s;
    }
    run_verify(&cfg)
}

fn run_verify(cfg: &VerifyConfig) -> Result<bool, Error> {
    let rep = verify::inequality_sweep(cfg);
    let line = |name: &str, v: f64, tol: f64| {
        println!(
            "{} {name}: worst violation {v:.3e} (tol {tol:.1e})",
            if v <= tol { "PASS" } else { "FAIL" }
        );
    };
    println!(
        "inequality sweep: {} samples per (n,k), n <= {}, seed {}",
        rep.samples_per_pair, rep.nmax, cfg.seed
    );
    line("uniform-parabolicity lower", rep.uniform_lower, verify::INEQUALITY_TOL);
    line("uniform-parabolicity upper", rep.uniform_upper, verify::INEQUALITY_TOL);
    line("parabolic-coefficient cap", rep.parabolic_cap, verify::INEQUALITY_TOL);
    line("reaction lower", rep.reaction_lower, verify::INEQUALITY_TOL);
    line("reaction upper", rep.reaction_upper, verify::INEQUALITY_TOL);
    line("concavity form", rep.concavity_max, verify::CONCAVITY_TOL);
    line(
        "gradient finite-difference",
        rep.gradient_fd_max_err,
        verify::GRADIENT_FD_TOL,
    );
    let oracle_rep = verify::oracle_checks();
    println!(
        "{} oracle: ball ODE max err {:.3e}, extinction monotone {}",
        if oracle_rep.pass() { "PASS" } else { "FAIL" },
        oracle_rep.ode_max_err,
        oracle_rep.monotone_ok
    );
    Ok(rep.pass() && oracle_rep.pass())
}

fn cmd_oracle(args: &[String]) -> Result<bool, Error> {
    let flags = Flags::new(args);
    let pos = args
        .iter()
        .position(|a| a == "--ball")
        .ok_or_else(|| Error::Config("oracle: expected --ball R=<r> n=<n> k=<k>".into()))?;
    let mut r0 = None;
    let mut n = None;
    let mut k = None;
    for tok in &args[pos + 1..] {
        if tok.starts_with("--") {
            break;
        }
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("oracle: bad token `{tok}`")))?;
        match key {
            "R" | "r" => r0 = Some(value.parse::<f64>().map_err(|e| Error::Config(e.to_string()))?),
            "n" => n = Some(value.parse::<usize>().map_err(|e| Error::Config(e.to_string()))?),
            "k" => k = Some(value.parse::<usize>().map_err(|e| Error::Config(e.to_string()))?),
            other => return Err(Error::Config(format!("oracle: unknown key `{other}`"))),
        }
    }
    let (Some(r0), Some(n), Some(k)) = (r0, n, k) else {
        return Err(Error::Config("oracle: need R=, n=, k=".into()));
    };
    if k < 1 || k > n || r0 <= 0.0 {
        return Err(Error::Config("oracle: need R > 0 and 1 <= k <= n".into()));
    }
    let ball = BallSolution::new(0.0, r0, n, k);
    println!("ball R0={r0} n={n} k={k}");
    println!("law: rho(t)^2 = R0^2 - {} t", snapshot::fmt_f64(ball.law_coefficient()));
    println!("extinction time = {}", snapshot::fmt_f64(ball.extinction_time()));
    println!(
        "existence lower bound = {}",
        snapshot::fmt_f64(qkflow_core::oracle::existence_time_lower_bound(r0, n, k))
    );
    if let Some(t) = flags.parse::<f64>("--t")? {
        let rho = ball.radius(t)?;
        println!("radius(t={t}) = {}", snapshot::fmt_f64(rho));
    }
    Ok(true)
}

fn cmd_report(args: &[String]) -> Result<bool, Error> {
    let flags = Flags::new(args);
    let path = flags
        .value_of("--series")
        .ok_or_else(|| Error::Config("report: expected --series FILE".into()))?;
    let series: MonitorSeries = snapshot::load_series(path)?;
    if series.rows.len() < 2 {
        return Err(Error::Config("series has fewer than two rows".into()));
    }
    println!(
        "series {} rows, n={} k={} M={}",
        series.rows.len(),
        series.n,
        series.k,
        series.m_level
    );
    let verdicts = monitors::standard_verdicts(&series);
    for v in &verdicts {
        println!("{v}");
    }
    Ok(verdicts.iter().all(|v| v.pass))
}
