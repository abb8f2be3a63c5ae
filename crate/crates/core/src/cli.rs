//! Command-line front end: `run`, `sweep` and `analyze`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 failed check, 4 runtime error.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{gradient_check, refinement_study, GradientGrid};
use crate::averaged::{
    bounds_audit, tuning_condition, tuning_lhs, AuditBox, AuditSettings, AveragedSystem,
    TuningInputs,
};
use crate::config::{preset, ScenarioConfig};
use crate::error::{ConfigError, Error};
use crate::sim::{
    format_sig9, median, metrics, run_cells, thresholds, RunMetrics, RunStatus, Simulator,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tdoa-seek",
    version,
    about = "TDOA source seeking with extremum-seeking yaw control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario; writes trajectory.csv and summary.txt.
    Run(RunArgs),
    /// Simulate the cartesian product of axis values and seeds.
    Sweep(SweepArgs),
    /// Numerical checks: gradcheck, tuning, bounds, refinement.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file; defaults to the bundled simulation preset.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Bundled preset: sim_v_b1 or experiment_vi.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Noise seed; shorthand for --override noise.seed=N.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted key=value override, applied left to right.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Axis as key=v1,v2,...; repeat for a grid.
    #[arg(long = "axis", value_name = "KEY=V1,V2")]
    pub axes: Vec<String>,
    /// Seeds as a comma list or a half-open range `a..b`.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Gradcheck,
    Tuning,
    Bounds,
    Refinement,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub check: Check,
    /// Check parameters as key=value.
    #[arg(value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn execute(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Analyze(a) => cmd_analyze(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn load_config(c: &Common) -> Result<ScenarioConfig, Error> {
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("noise.seed={seed}"));
    }
    let cfg = match (&c.scenario, &c.preset) {
        (Some(path), _) => ScenarioConfig::load(path, &overrides)?,
        (None, name) => {
            let name = name.as_deref().unwrap_or("sim_v_b1");
            let text = preset(name)
                .ok_or_else(|| ConfigError::new("--preset", format!("unknown preset {name:?}")))?;
            ScenarioConfig::from_str_with_overrides(text, &overrides)?
        }
    };
    if !c.quiet {
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<PathBuf, Error> {
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| io_error(&dir, source))?;
    Ok(dir)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| io_error(path, source))
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_else(|| "none".to_string())
}

fn metric_lines(out: &mut String, m: &RunMetrics) {
    let _ = writeln!(out, "time_to_range = {}", opt(m.time_to_range));
    let _ = writeln!(out, "final_range = {}", format_sig9(m.final_range));
    let _ = writeln!(out, "mean_abs_surge = {}", opt(m.mean_abs_surge));
    let _ = writeln!(out, "direction_flips = {}", m.direction_flips);
    let _ = writeln!(out, "path_length = {}", format_sig9(m.path_length));
}

fn cmd_run(a: &RunArgs) -> Result<i32, Error> {
    let cfg = load_config(&a.common)?;
    let dir = out_dir(&a.common)?;
    let tr = Simulator::new(&cfg)?.run();
    let m = metrics(&tr, &thresholds(&cfg));

    let csv_path = dir.join("trajectory.csv");
    let file = fs::File::create(&csv_path).map_err(|source| io_error(&csv_path, source))?;
    tr.write_csv(std::io::BufWriter::new(file))
        .map_err(|source| io_error(&csv_path, source))?;

    let mut s = String::new();
    let _ = writeln!(s, "success = {}", m.reached());
    let _ = writeln!(
        s,
        "target_range = {}",
        format_sig9(cfg.metrics.target_range)
    );
    let status = match tr.status {
        RunStatus::Horizon => "horizon",
        RunStatus::ReachedTarget => "reached_stop_range",
    };
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "t_end = {}", format_sig9(tr.terminal.t));
    metric_lines(&mut s, &m);
    let _ = writeln!(s, "seed = {}", cfg.noise.seed);
    write_file(&dir.join("summary.txt"), &s)?;
    if !a.common.quiet {
        print!("{s}");
    }
    Ok(EXIT_OK)
}

/// `key=v1,v2,...` into `(key, [v1, v2, ...])` with every value finite.
fn parse_axis(text: &str) -> Result<(String, Vec<String>), ConfigError> {
    let (key, values) = text.split_once('=').ok_or_else(|| {
        ConfigError::new("--axis", format!("{text:?} must have the form key=v1,v2"))
    })?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::new(key.trim(), "axis has no values"));
    }
    for v in &values {
        if let Ok(x) = v.parse::<f64>() {
            if !x.is_finite() {
                return Err(ConfigError::new(
                    key.trim(),
                    format!("axis value {v} is not finite"),
                ));
            }
        }
    }
    Ok((key.trim().to_string(), values))
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = |m: String| ConfigError::new("--seeds", m);
    let seeds: Vec<u64> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range start {lo:?}")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range end {hi:?}")))?;
        (lo..hi).collect()
    } else {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(format!("bad seed {s:?}"))))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad("seed list is empty".to_string()));
    }
    Ok(seeds)
}

/// Axis assignment, seed and the resolved (or rejected) scenario of one sweep cell.
type SweepRow = (
    Vec<(String, String)>,
    u64,
    Result<ScenarioConfig, ConfigError>,
);

fn cmd_sweep(a: &SweepArgs) -> Result<i32, Error> {
    let base = load_config(&a.common)?;
    let dir = out_dir(&a.common)?;
    let axes = a
        .axes
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<Vec<_>, _>>()?;
    let seeds = match &a.seeds {
        Some(s) => parse_seeds(s)?,
        None => vec![base.noise.seed],
    };

    // Cartesian product of axis values, last axis fastest.
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in &axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }

    // Cells that fail validation are reported in their row, not fatal.
    let mut rows: Vec<SweepRow> = Vec::new();
    for combo in &combos {
        for &seed in &seeds {
            let mut ov: Vec<String> = combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
            ov.push(format!("noise.seed={seed}"));
            rows.push((combo.clone(), seed, base.with_overrides(&ov)));
        }
    }
    let runnable: Vec<(ScenarioConfig, u64)> = rows
        .iter()
        .filter_map(|(_, _, c)| c.as_ref().ok().map(|c| (*c, 0)))
        .collect();
    let mut outcomes = run_cells(&runnable).into_iter();

    let keys: Vec<&str> = axes.iter().map(|(k, _)| k.as_str()).collect();
    let mut csv = String::new();
    for k in &keys {
        let _ = write!(csv, "{k},");
    }
    let _ = writeln!(
        csv,
        "seed,success,time_to_range,final_range,mean_abs_surge,direction_flips,path_length,error"
    );
    let mut groups: BTreeMap<usize, Vec<Option<RunMetrics>>> = BTreeMap::new();
    let mut failures = 0;
    for (i, (combo, seed, cfg)) in rows.iter().enumerate() {
        for (_, v) in combo {
            let _ = write!(csv, "{v},");
        }
        let result = match cfg {
            Ok(_) => {
                outcomes
                    .next()
                    .expect("one outcome per runnable cell")
                    .result
            }
            Err(e) => Err(e.clone()),
        };
        match &result {
            Ok(m) => {
                let _ = writeln!(
                    csv,
                    "{seed},{},{},{},{},{},{},",
                    m.reached(),
                    opt(m.time_to_range),
                    format_sig9(m.final_range),
                    opt(m.mean_abs_surge),
                    m.direction_flips,
                    format_sig9(m.path_length)
                );
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(csv, "{seed},false,none,none,none,none,none,\"{e}\"");
            }
        }
        groups.entry(i / seeds.len()).or_default().push(result.ok());
    }
    write_file(&dir.join("sweep.csv"), &csv)?;

    let mut summary = String::new();
    for k in &keys {
        let _ = write!(summary, "{k},");
    }
    let _ = writeln!(
        summary,
        "runs,success_fraction,median_time_to_range,median_direction_flips"
    );
    let mut all: Vec<Option<RunMetrics>> = Vec::new();
    for (gi, ms) in &groups {
        for (_, v) in &combos[*gi] {
            let _ = write!(summary, "{v},");
        }
        let _ = writeln!(summary, "{}", aggregate(ms));
        all.extend(ms.iter().copied());
    }
    write_file(&dir.join("sweep_summary.csv"), &summary)?;

    let agg = Aggregate::of(&all);
    let mut s = String::new();
    let _ = writeln!(s, "cells = {}", rows.len());
    let _ = writeln!(s, "failed_cells = {failures}");
    let _ = writeln!(
        s,
        "success_fraction = {}",
        format_sig9(agg.success_fraction)
    );
    let _ = writeln!(s, "median_time_to_range = {}", opt(agg.median_time));
    write_file(&dir.join("summary.txt"), &s)?;
    if !a.common.quiet {
        print!("{summary}{s}");
    }
    Ok(EXIT_OK)
}

struct Aggregate {
    runs: usize,
    success_fraction: f64,
    median_time: Option<f64>,
    median_flips: Option<f64>,
}

impl Aggregate {
    /// Failed cells count as runs that did not succeed.
    fn of(ms: &[Option<RunMetrics>]) -> Self {
        let ok: Vec<&RunMetrics> = ms.iter().flatten().collect();
        let reached = ok.iter().filter(|m| m.reached()).count();
        let times: Vec<f64> = ok.iter().filter_map(|m| m.time_to_range).collect();
        let flips: Vec<f64> = ok.iter().map(|m| m.direction_flips as f64).collect();
        Self {
            runs: ms.len(),
            success_fraction: if ms.is_empty() {
                0.0
            } else {
                reached as f64 / ms.len() as f64
            },
            median_time: median(&times),
            median_flips: median(&flips),
        }
    }
}

fn aggregate(ms: &[Option<RunMetrics>]) -> String {
    let a = Aggregate::of(ms);
    format!(
        "{},{},{},{}",
        a.runs,
        format_sig9(a.success_fraction),
        opt(a.median_time),
        opt(a.median_flips)
    )
}

/// Analysis parameters given as `key=value`; every key must be consumed.
struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    fn parse(items: &[String]) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::new(item, "expected key=value"))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) => parse_number(&v)
                .ok_or_else(|| ConfigError::new(key, format!("not a number: {v:?}"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError::new(key, format!("not a count: {v:?}"))),
        }
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.values.remove(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    parse_number(s.trim())
                        .ok_or_else(|| ConfigError::new(key, format!("not a number: {s:?}")))
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.values.keys().next() {
            Some(k) => Err(ConfigError::new(k, "unknown parameter for this check")),
            None => Ok(()),
        }
    }
}

/// Plain numbers plus `pi` multiples and fractions such as `2pi/16` or `pi/3`.
fn parse_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let coef = match num.strip_suffix("pi")? {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    Some(coef * std::f64::consts::PI / den)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32, Error> {
    let cfg = load_config(&a.common)?;
    let mut p = Params::parse(&a.params)?;
    let mut out = String::new();
    let passed = match a.check {
        Check::Gradcheck => {
            let d = GradientGrid::default();
            let grid = GradientGrid {
                baseline: p.f64("d", d.baseline)?,
                depth: p.f64("z", d.depth)?,
                ranges: (
                    p.f64("rmin", d.ranges.0)?,
                    p.f64("rmax", d.ranges.1)?,
                    p.f64("rstep", d.ranges.2)?,
                ),
                alphas: (
                    p.f64("amin", d.alphas.0)?,
                    p.f64("amax", d.alphas.1)?,
                    p.f64("astep", d.alphas.2)?,
                ),
                skip_below: p.f64("skip", d.skip_below)?,
                fd_step: p.f64("h", d.fd_step)?,
            };
            let tol = p.f64("tol", 0.02)?;
            p.finish()?;
            if !(grid.ranges.2 > 0.0 && grid.alphas.2 > 0.0) {
                return Err(ConfigError::new("rstep", "grid steps must be > 0").into());
            }
            let r = gradient_check(&grid);
            let _ = writeln!(out, "points = {}", r.points);
            let _ = writeln!(
                out,
                "max_relative_error = {}",
                format_sig9(r.max_relative_error)
            );
            let _ = writeln!(out, "worst_range = {}", format_sig9(r.worst.0));
            let _ = writeln!(out, "worst_alpha = {}", format_sig9(r.worst.1));
            let ok = r.points > 0 && r.max_relative_error <= tol;
            let _ = writeln!(out, "verdict = {}", if ok { "pass" } else { "fail" });
            ok
        }
        Check::Tuning => {
            let t = TuningInputs {
                u0: p.f64("u0", cfg.surge.u0)?,
                baseline: p.f64("d", cfg.baseline.d)?,
                depth: p.f64("z", cfg.source.z)?,
                a: p.f64("a", cfg.es.a)?,
                k: p.f64("k", cfg.es.k)?,
                epsilon: p.f64("eps", cfg.surge.epsilon)?,
                delta: p.f64("delta", 0.0)?,
            };
            p.finish()?;
            let ok = tuning_condition(&t);
            let _ = writeln!(out, "lhs = {}", format_sig9(tuning_lhs(&t)));
            let _ = writeln!(
                out,
                "verdict = {}",
                if ok { "satisfied" } else { "violated" }
            );
            ok
        }
        Check::Bounds => {
            let s = AuditSettings::default();
            let sys = AveragedSystem::new(
                cfg.es,
                crate::control::SurgeParams {
                    mu: p.f64("mu", cfg.surge.mu)?,
                    ..cfg.surge
                },
                p.f64("d", 1.0)?,
                p.f64("z", 5.0)?,
            );
            let bx = AuditBox {
                range: (p.f64("rmin", 0.0)?, p.f64("rmax", 100.0)?),
                alpha: (
                    p.f64("amin", -std::f64::consts::PI)?,
                    p.f64("amax", std::f64::consts::PI)?,
                ),
                filter: (p.f64("xmin", -1.0)?, p.f64("xmax", 1.0)?),
            };
            let settings = AuditSettings {
                mu: sys.surge.mu,
                samples: p.usize("samples", s.samples)?,
                seed: p.usize("seed", s.seed as usize)? as u64,
                fd_step: p.f64("h", s.fd_step)?,
            };
            p.finish()?;
            let report = bounds_audit(&sys, &bx, &settings)?;
            let _ = write!(out, "{report}");
            let ok = report.all_finite();
            let _ = writeln!(out, "verdict = {}", if ok { "pass" } else { "fail" });
            ok
        }
        Check::Refinement => {
            let omegas = p.list("omegas", &[TAU / 16.0, TAU / 4.0, TAU])?;
            let start = (p.f64("r0", 40.0)?, p.f64("alpha0", 1.0)?);
            let horizon = p.f64("horizon", 300.0)?;
            p.finish()?;
            let rows = refinement_study(&cfg, &omegas, start, horizon)?;
            let _ = writeln!(out, "omega,sup_range,sup_alpha,sup");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_sig9(r.omega),
                    format_sig9(r.sup_range),
                    format_sig9(r.sup_alpha),
                    format_sig9(r.sup())
                );
            }
            let ok = rows.windows(2).all(|w| w[1].sup() < w[0].sup());
            let _ = writeln!(
                out,
                "verdict = {}",
                if ok { "decreasing" } else { "not decreasing" }
            );
            ok
        }
    };
    if let Some(dir) = &a.common.out {
        fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
        write_file(&dir.join("analysis.txt"), &out)?;
    }
    if !a.common.quiet {
        print!("{out}");
    }
    Ok(if passed { EXIT_OK } else { EXIT_CHECK })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("7, 9").unwrap(), vec![7, 9]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("4..4").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn axis_parse() {
        let (k, v) = parse_axis("baseline.d=2,5").unwrap();
        assert_eq!(k, "baseline.d");
        assert_eq!(v, vec!["2", "5"]);
        assert!(parse_axis("baseline.d=").is_err());
        assert!(parse_axis("baseline.d=1,inf").is_err());
        assert!(parse_axis("nokey").is_err());
    }

    #[test]
    fn numbers_with_pi() {
        assert_eq!(parse_number("0.5"), Some(0.5));
        assert!((parse_number("pi/3").unwrap() - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        assert!((parse_number("2pi/16").unwrap() - TAU / 16.0).abs() < 1e-15);
        assert!((parse_number("-pi").unwrap() + std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(parse_number("banana"), None);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
