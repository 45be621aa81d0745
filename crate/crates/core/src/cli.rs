//! Command-line front end: subcommands, TOML config files with flag overrides,
//! normalization into a [`RunConfig`], dispatch, and report output.
//!
//! Exit codes: 0 success, 1 numeric failure, 2 usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::approx::{convergence_report, DecayConstants};
use crate::error::{Error, Result};
use crate::gauss::build_covariance;
use crate::kernel::KernelSpec;
use crate::malliavin::{optimize_tail_bound, CapacityIndex, TailBoundParams, TailMesh};
use crate::mc::{approximation_gap, ladder, EstimationMode, EventKind, EventSpec, GapOptions};
use crate::rate::{evaluate, RateQuery};
use crate::report::{num, render_json, write_atomic, CsvReport, Format};
use crate::rng::SeededStream;

pub const ENV_OUT_DIR: &str = "FBMLAB_OUT_DIR";
pub const ENV_THREADS: &str = "FBMLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelAudit,
    Converge,
    Rate,
    TailBound,
    McLdp,
    ApproxGap,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::KernelAudit => "kernel-audit",
            Command::Converge => "converge",
            Command::Rate => "rate",
            Command::TailBound => "tail-bound",
            Command::McLdp => "mc-ldp",
            Command::ApproxGap => "approx-gap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EventName {
    TerminalExceed,
    SupExceed,
    SigmaBallComplement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QueryName {
    Point,
    Ball,
    Exceedance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeName {
    MonteCarlo,
    Oracle,
}

/// Levels as a list or an inclusive `a..b` range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum LevelsSpec {
    List(Vec<u32>),
    Text(String),
}

pub fn parse_levels(s: &str) -> std::result::Result<Vec<u32>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| format!("bad level range start in '{s}'"))?;
        let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad level range end in '{s}'"))?;
        if a > b {
            return Err(format!("empty level range '{s}'"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| format!("bad level '{p}'"))).collect()
}

/// Partial settings shared by config files and flags; keys mirror the flag names.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    command: Option<Command>,
    hurst: Option<f64>,
    levels: Option<LevelsSpec>,
    horizon: Option<f64>,
    times: Option<Vec<f64>>,
    eps: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
    n_paths: Option<u64>,
    seed: Option<u64>,
    event: Option<EventName>,
    a: Option<f64>,
    radius: Option<f64>,
    center: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
    query: Option<QueryName>,
    mode: Option<ModeName>,
    p: Option<f64>,
    r: Option<u32>,
    out: Option<String>,
    format: Option<Format>,
}

/// Normalized configuration echoed into every report. Fields a command does not
/// use are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub hurst: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: Format,
}

#[derive(Debug, Parser)]
#[command(
    name = "fbmlab",
    version,
    about = "Fractional Brownian motion kernels, approximations, rates and tail bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Covariance identity residuals of the kernel on the probe grid.
    KernelAudit(Flags),
    /// Exact L² error of the dyadic approximation against its decay bounds.
    Converge(Flags),
    /// Rate function at a point or its infimum over a ball or exceedance set.
    Rate(Flags),
    /// Optimized capacity tail bound per (level, lambda).
    TailBound(Flags),
    /// Monte Carlo or oracle ε-ladder with log-slope fit.
    McLdp(Flags),
    /// Sup-norm gap frequency between interpolation levels next to its capacity bound.
    ApproxGap(Flags),
}

#[derive(Debug, Clone, Default, Args)]
struct Flags {
    /// TOML file with the same keys as the flags (underscores for dashes).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hurst: Option<f64>,
    /// Levels as `a..b` (inclusive) or a comma list.
    #[arg(long, value_parser = |s: &str| parse_levels(s).map(LevelList))]
    levels: Option<LevelList>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    times: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    n_paths: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    event: Option<EventName>,
    /// Exceedance level.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    query: Option<QueryName>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Capacity integrability index.
    #[arg(long)]
    p: Option<f64>,
    /// Capacity differentiability index.
    #[arg(long)]
    r: Option<u32>,
    /// Report path; relative paths resolve under FBMLAB_OUT_DIR when set.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone)]
struct LevelList(Vec<u32>);

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            command: None,
            hurst: self.hurst,
            levels: self.levels.clone().map(|l| LevelsSpec::List(l.0)),
            horizon: self.horizon,
            times: self.times.clone(),
            eps: self.eps.clone(),
            lambdas: self.lambdas.clone(),
            n_paths: self.n_paths,
            seed: self.seed,
            event: self.event,
            a: self.a,
            radius: self.radius,
            center: self.center.clone(),
            x: self.x.clone(),
            query: self.query,
            mode: self.mode,
            p: self.p,
            r: self.r,
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
        }
    }
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f),)* }
    };
}

fn merge(base: Settings, top: Settings) -> Settings {
    overlay!(
        base, top, command, hurst, levels, horizon, times, eps, lambdas, n_paths, seed, event, a, radius, center, x,
        query, mode, p, r, out, format
    )
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn read_settings(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("--config {}: {}", path.display(), e.message())))
}

/// Parses argv (including the program name) into a normalized configuration.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| usage(e.to_string()))?;
    config_from_cli(&cli)
}

fn config_from_cli(cli: &Cli) -> Result<RunConfig> {
    let (command, flags) = match &cli.command {
        CommandArgs::KernelAudit(f) => (Command::KernelAudit, f),
        CommandArgs::Converge(f) => (Command::Converge, f),
        CommandArgs::Rate(f) => (Command::Rate, f),
        CommandArgs::TailBound(f) => (Command::TailBound, f),
        CommandArgs::McLdp(f) => (Command::McLdp, f),
        CommandArgs::ApproxGap(f) => (Command::ApproxGap, f),
    };
    let file = match &flags.config {
        Some(p) => read_settings(p)?,
        None => Settings::default(),
    };
    if let Some(c) = file.command {
        if c != command {
            return Err(usage(format!("config file is for '{}', not '{}'", c.name(), command.name())));
        }
    }
    normalize(command, merge(file, flags.settings()))
}

struct Normalizer {
    command: Command,
}

impl Normalizer {
    fn reject(&self, present: bool, flag: &str) -> Result<()> {
        if present {
            return Err(usage(format!("--{flag} is not used by {}", self.command.name())));
        }
        Ok(())
    }
}

fn check(ok: bool, flag: &str, msg: impl std::fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(usage(format!("--{flag}: {msg}")))
    }
}

fn check_positive(v: &[f64], flag: &str) -> Result<()> {
    check(!v.is_empty(), flag, "must not be empty")?;
    check(v.iter().all(|&x| x > 0.0 && x.is_finite()), flag, "values must be positive and finite")
}

fn normalize(command: Command, s: Settings) -> Result<RunConfig> {
    use Command::*;
    let n = Normalizer { command };
    let uses = |flag: &str| -> bool {
        match flag {
            "levels" => matches!(command, Converge | TailBound | McLdp | ApproxGap),
            "horizon" => matches!(command, Converge | McLdp),
            "times" | "x" | "query" => command == Rate,
            "eps" | "n_paths" | "seed" => matches!(command, McLdp | ApproxGap),
            "lambdas" | "p" | "r" => matches!(command, TailBound | ApproxGap),
            "event" | "mode" => command == McLdp,
            "a" | "radius" | "center" => matches!(command, Rate | McLdp),
            _ => true,
        }
    };
    let present = [
        ("levels", s.levels.is_some()),
        ("horizon", s.horizon.is_some()),
        ("times", s.times.is_some()),
        ("x", s.x.is_some()),
        ("query", s.query.is_some()),
        ("eps", s.eps.is_some()),
        ("n_paths", s.n_paths.is_some()),
        ("seed", s.seed.is_some()),
        ("lambdas", s.lambdas.is_some()),
        ("p", s.p.is_some()),
        ("r", s.r.is_some()),
        ("event", s.event.is_some()),
        ("mode", s.mode.is_some()),
        ("a", s.a.is_some()),
        ("radius", s.radius.is_some()),
        ("center", s.center.is_some()),
    ];
    for (flag, p) in present {
        if !uses(flag) {
            n.reject(p, &flag.replace('_', "-"))?;
        }
    }

    let hurst = s.hurst.ok_or_else(|| usage("--hurst is required"))?;
    check((0.5..1.0).contains(&hurst), "hurst", format!("{hurst} outside [0.5, 1)"))?;
    let levels = match &s.levels {
        None => None,
        Some(LevelsSpec::List(v)) => Some(v.clone()),
        Some(LevelsSpec::Text(t)) => Some(parse_levels(t).map_err(|e| usage(format!("--levels: {e}")))?),
    };
    if let Some(l) = &levels {
        check(!l.is_empty(), "levels", "must not be empty")?;
        check(l.iter().all(|&m| m <= 30), "levels", "levels above 30 are not supported")?;
    }
    let format = s.format.unwrap_or_else(|| match &s.out {
        Some(o) if o.ends_with(".json") => Format::Json,
        _ => Format::Csv,
    });
    let mut cfg = RunConfig {
        command,
        hurst,
        levels: None,
        horizon: None,
        times: None,
        eps: None,
        lambdas: None,
        n_paths: None,
        seed: None,
        event: None,
        a: None,
        radius: None,
        center: None,
        x: None,
        query: None,
        mode: None,
        p: None,
        r: None,
        out: s.out.clone(),
        format,
    };

    let horizon = |cfg: &mut RunConfig| -> Result<()> {
        let t = s.horizon.unwrap_or(1.0);
        check(t > 0.0 && t <= 1.0, "horizon", format!("{t} outside (0, 1]"))?;
        cfg.horizon = Some(t);
        Ok(())
    };
    let capacity = |cfg: &mut RunConfig, p: f64, r: u32| -> Result<()> {
        let p = s.p.unwrap_or(p);
        check(p > 1.0, "p", format!("capacity index needs p > 1, got {p}"))?;
        cfg.p = Some(p);
        cfg.r = Some(s.r.unwrap_or(r));
        Ok(())
    };
    let sampling = |cfg: &mut RunConfig, default_paths: u64| -> Result<()> {
        let n = s.n_paths.unwrap_or(default_paths);
        check(n >= crate::mc::MIN_PATHS, "n-paths", format!("need at least {}", crate::mc::MIN_PATHS))?;
        cfg.n_paths = Some(n);
        cfg.seed = Some(s.seed.unwrap_or(0));
        Ok(())
    };

    match command {
        KernelAudit => {}
        Converge => {
            let l = levels.unwrap_or_else(|| (1..=8).collect());
            check(l.iter().all(|&m| m <= 20), "levels", "converge supports levels up to 20")?;
            cfg.levels = Some(l);
            horizon(&mut cfg)?;
        }
        Rate => {
            let times = s.times.clone().ok_or_else(|| usage("--times is required"))?;
            check_positive(&times, "times")?;
            check(times.iter().all(|&t| t <= 1.0), "times", "values must lie in (0, 1]")?;
            let d = times.len();
            let query = match s.query {
                Some(q) => q,
                None if s.x.is_some() => QueryName::Point,
                None if s.center.is_some() || s.radius.is_some() => QueryName::Ball,
                None if s.a.is_some() => QueryName::Exceedance,
                None => return Err(usage("--query is required (point, ball or exceedance)")),
            };
            match query {
                QueryName::Point => {
                    let x = s.x.clone().ok_or_else(|| usage("--x is required for a point query"))?;
                    check(x.len() == d, "x", format!("expected {d} values, got {}", x.len()))?;
                    n.reject(s.center.is_some(), "center")?;
                    n.reject(s.radius.is_some(), "radius")?;
                    n.reject(s.a.is_some(), "a")?;
                    cfg.x = Some(x);
                }
                QueryName::Ball => {
                    let c = s.center.clone().ok_or_else(|| usage("--center is required for a ball query"))?;
                    check(c.len() == d, "center", format!("expected {d} values, got {}", c.len()))?;
                    let r = s.radius.ok_or_else(|| usage("--radius is required for a ball query"))?;
                    check(r >= 0.0, "radius", "must be nonnegative")?;
                    n.reject(s.x.is_some(), "x")?;
                    n.reject(s.a.is_some(), "a")?;
                    cfg.center = Some(c);
                    cfg.radius = Some(r);
                }
                QueryName::Exceedance => {
                    let a = s.a.ok_or_else(|| usage("--a is required for an exceedance query"))?;
                    check(a >= 0.0, "a", "must be nonnegative")?;
                    n.reject(s.x.is_some(), "x")?;
                    n.reject(s.center.is_some(), "center")?;
                    n.reject(s.radius.is_some(), "radius")?;
                    cfg.a = Some(a);
                }
            }
            cfg.times = Some(times);
            cfg.query = Some(query);
        }
        TailBound => {
            check(hurst > 0.5, "hurst", "tail bounds need hurst > 0.5")?;
            cfg.levels = Some(levels.unwrap_or_else(|| (1..=10).collect()));
            let l = s.lambdas.clone().unwrap_or_else(|| vec![0.1]);
            check_positive(&l, "lambdas")?;
            cfg.lambdas = Some(l);
            capacity(&mut cfg, 2.0, 1)?;
        }
        McLdp => {
            let event = s.event.unwrap_or(EventName::TerminalExceed);
            let level = match levels.as_deref() {
                None => {
                    if event == EventName::TerminalExceed {
                        0
                    } else {
                        4
                    }
                }
                Some([m]) => *m,
                Some(_) => return Err(usage("--levels: mc-ldp takes a single level")),
            };
            check(level <= 12, "levels", "mc-ldp supports levels up to 12")?;
            cfg.levels = Some(vec![level]);
            horizon(&mut cfg)?;
            match event {
                EventName::TerminalExceed | EventName::SupExceed => {
                    n.reject(s.center.is_some(), "center")?;
                    n.reject(s.radius.is_some(), "radius")?;
                    let a = s.a.unwrap_or(1.0);
                    check(a > 0.0, "a", "must be positive")?;
                    cfg.a = Some(a);
                }
                EventName::SigmaBallComplement => {
                    n.reject(s.a.is_some(), "a")?;
                    let d = 1usize << level;
                    let c = s.center.clone().unwrap_or_else(|| vec![0.0; d]);
                    check(c.len() == d, "center", format!("expected {d} values, got {}", c.len()))?;
                    let r = s.radius.ok_or_else(|| usage("--radius is required for sigma_ball_complement"))?;
                    check(r >= 0.0, "radius", "must be nonnegative")?;
                    cfg.center = Some(c);
                    cfg.radius = Some(r);
                }
            }
            cfg.event = Some(event);
            let eps = s.eps.clone().unwrap_or_else(|| vec![0.5, 0.4, 0.33, 0.29, 0.25]);
            check_positive(&eps, "eps")?;
            check(eps.windows(2).all(|w| w[1] < w[0]), "eps", "must be strictly decreasing")?;
            cfg.eps = Some(eps);
            let mode = s.mode.unwrap_or(ModeName::MonteCarlo);
            cfg.mode = Some(mode);
            if mode == ModeName::MonteCarlo {
                sampling(&mut cfg, 100_000)?;
            } else {
                n.reject(s.n_paths.is_some(), "n-paths")?;
                n.reject(s.seed.is_some(), "seed")?;
            }
        }
        ApproxGap => {
            let l = levels.unwrap_or_else(|| vec![1, 2, 3]);
            check(l.iter().all(|&m| (1..=6).contains(&m)), "levels", "approx-gap supports levels 1..6")?;
            cfg.levels = Some(l);
            let eps = s.eps.clone().unwrap_or_else(|| vec![1.0]);
            check(eps.len() == 1, "eps", "approx-gap takes a single eps")?;
            check_positive(&eps, "eps")?;
            cfg.eps = Some(eps);
            let lam = s.lambdas.clone().unwrap_or_else(|| vec![0.2]);
            check_positive(&lam, "lambdas")?;
            cfg.lambdas = Some(lam);
            sampling(&mut cfg, 10_000)?;
            capacity(&mut cfg, 3.0, 2)?;
        }
    }
    Ok(cfg)
}

/// Rendered report plus a one-line summary for the terminal.
pub struct Outcome {
    pub report: Vec<u8>,
    pub summary: String,
}

#[derive(Serialize)]
struct TailRow {
    m: u32,
    lambda: f64,
    bound: f64,
    params: TailBoundParams,
}

/// Executes a normalized configuration and renders its report.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::KernelAudit => {
            let audit = KernelSpec::new(cfg.hurst)?.audit()?;
            let summary = format!("max |residual| = {:e}", audit.max_abs_residual);
            let report = match cfg.format {
                Format::Json => render_json(cfg, &audit)?,
                Format::Csv => {
                    let mut r = CsvReport::new(&["s", "t", "quadrature", "closed_form", "residual"]);
                    r.note("max_abs_residual", num(audit.max_abs_residual));
                    for &(s, t, q, c, e) in &audit.rows {
                        r.push(vec![num(s), num(t), num(q), num(c), num(e)]);
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
        Command::Converge => {
            let spec = KernelSpec::new(cfg.hurst)?;
            let levels = cfg.levels.as_deref().unwrap_or_default();
            let rep =
                convergence_report(&spec, cfg.horizon.unwrap_or(1.0), levels, &DecayConstants::for_kernel(&spec))?;
            let summary = format!("log2 slope = {}", num(rep.fitted_slope));
            let report = match cfg.format {
                Format::Json => render_json(cfg, &rep)?,
                Format::Csv => {
                    let mut r = CsvReport::new(&["m", "exact_l2", "lower", "upper"]);
                    r.note("slope", num(rep.fitted_slope));
                    for k in 0..rep.levels.len() {
                        r.push(vec![
                            rep.levels[k].to_string(),
                            num(rep.exact_l2[k]),
                            num(rep.lower_component[k]),
                            num(rep.upper_component[k]),
                        ]);
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
        Command::Rate => {
            let times = cfg.times.as_deref().unwrap_or_default();
            let cov = build_covariance(cfg.hurst, times)?;
            let query = match cfg.query {
                Some(QueryName::Point) => RateQuery::Point { x: cfg.x.clone().unwrap_or_default() },
                Some(QueryName::Ball) => RateQuery::Ball {
                    center: cfg.center.clone().unwrap_or_default(),
                    radius: cfg.radius.unwrap_or_default(),
                },
                _ => RateQuery::Exceedance { a: cfg.a.unwrap_or_default(), one_sided: true },
            };
            let res = evaluate(&cov, &query)?;
            let summary = format!("rate = {}", num(res.value));
            let report = match cfg.format {
                Format::Json => render_json(cfg, &res)?,
                Format::Csv => {
                    let mut r = CsvReport::new(&["k", "time", "argmin"]);
                    r.note("value", num(res.value));
                    r.note("method", serde_json::to_value(res.method)?.as_str().unwrap_or_default());
                    if let Some(x) = &res.argmin {
                        for (k, (t, v)) in times.iter().zip(x).enumerate() {
                            r.push(vec![k.to_string(), num(*t), num(*v)]);
                        }
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
        Command::TailBound => {
            let idx = CapacityIndex::new(cfg.p.unwrap_or(2.0), cfg.r.unwrap_or(1))?;
            let mesh = TailMesh::default();
            let mut rows = Vec::new();
            for &m in cfg.levels.as_deref().unwrap_or_default() {
                for &lambda in cfg.lambdas.as_deref().unwrap_or_default() {
                    let opt = optimize_tail_bound(m, lambda, &idx, cfg.hurst, &mesh, 1.0)?;
                    rows.push(TailRow { m, lambda, bound: opt.bound, params: opt.params });
                }
            }
            let best = rows.iter().map(|r| r.bound).fold(f64::INFINITY, f64::min);
            let summary = format!("{} rows, smallest bound = {}", rows.len(), num(best));
            let report = match cfg.format {
                Format::Json => render_json(cfg, &rows)?,
                Format::Csv => {
                    let mut r =
                        CsvReport::new(&["m", "lambda", "bound", "n", "q", "theta", "gamma", "alpha", "beta", "kappa"]);
                    for t in &rows {
                        let p = &t.params;
                        r.push(vec![
                            t.m.to_string(),
                            num(t.lambda),
                            num(t.bound),
                            p.n.to_string(),
                            num(p.q),
                            num(p.theta),
                            num(p.gamma),
                            num(p.alpha),
                            num(p.derived.beta),
                            num(p.derived.kappa),
                        ]);
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
        Command::McLdp => {
            let level = cfg.levels.as_deref().and_then(|l| l.first().copied()).unwrap_or(0);
            let kind = match cfg.event {
                Some(EventName::SupExceed) => EventKind::SupExceed { a: cfg.a.unwrap_or(1.0) },
                Some(EventName::SigmaBallComplement) => EventKind::SigmaBallComplement {
                    center: cfg.center.clone().unwrap_or_default(),
                    radius: cfg.radius.unwrap_or_default(),
                },
                _ => EventKind::TerminalExceed { a: cfg.a.unwrap_or(1.0) },
            };
            let event = EventSpec { kind, hurst: cfg.hurst, level, horizon: cfg.horizon.unwrap_or(1.0) };
            let mode = match cfg.mode {
                Some(ModeName::Oracle) => EstimationMode::Oracle,
                _ => EstimationMode::MonteCarlo,
            };
            let stream = SeededStream::new(cfg.seed.unwrap_or(0), 0);
            let est = ladder(&event, cfg.eps.as_deref().unwrap_or_default(), cfg.n_paths.unwrap_or(0), &stream, mode)?;
            let summary = serde_json::to_string(&serde_json::json!({
                "slope": est.slope,
                "predicted": est.predicted,
                "ratio": est.ratio,
            }))?;
            let report = match cfg.format {
                Format::Json => render_json(cfg, &est)?,
                Format::Csv => {
                    let mut r = CsvReport::new(&["eps", "p_hat", "ci_low", "ci_high", "n_paths", "degenerate"]);
                    r.note("slope", num(est.slope));
                    r.note("predicted", num(est.predicted));
                    r.note("ratio", num(est.ratio));
                    for k in 0..est.epsilons.len() {
                        r.push(vec![
                            num(est.epsilons[k]),
                            num(est.p_hat[k]),
                            num(est.ci_low[k]),
                            num(est.ci_high[k]),
                            est.n_paths.to_string(),
                            est.degenerate[k].to_string(),
                        ]);
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
        Command::ApproxGap => {
            let opts = GapOptions {
                idx: CapacityIndex::new(cfg.p.unwrap_or(3.0), cfg.r.unwrap_or(2))?,
                ..GapOptions::default()
            };
            let eps = cfg.eps.as_deref().and_then(|e| e.first().copied()).unwrap_or(1.0);
            let n_paths = cfg.n_paths.unwrap_or(0);
            let root = SeededStream::new(cfg.seed.unwrap_or(0), 0);
            let mut rows = Vec::new();
            let mut k = 0;
            for &m in cfg.levels.as_deref().unwrap_or_default() {
                for &lambda in cfg.lambdas.as_deref().unwrap_or_default() {
                    rows.push(approximation_gap(cfg.hurst, m, eps, lambda, n_paths, &root.child(k), &opts)?);
                    k += 1;
                }
            }
            let exceed = rows.iter().filter(|g| g.gap_freq > g.probability_bound).count();
            let summary = format!("{} rows, frequency above probability bound in {exceed}", rows.len());
            let report = match cfg.format {
                Format::Json => render_json(cfg, &rows)?,
                Format::Csv => {
                    let mut r = CsvReport::new(&[
                        "m",
                        "reference_level",
                        "lambda",
                        "gap_freq",
                        "ci_low",
                        "ci_high",
                        "capacity_bound",
                        "probability_bound",
                        "n",
                        "q",
                        "theta",
                        "gamma",
                        "alpha",
                    ]);
                    for g in &rows {
                        let tuple = match &g.params {
                            Some(p) => vec![p.n.to_string(), num(p.q), num(p.theta), num(p.gamma), num(p.alpha)],
                            None => vec![String::new(); 5],
                        };
                        let mut row = vec![
                            g.m.to_string(),
                            g.reference_level.to_string(),
                            num(g.lambda),
                            num(g.gap_freq),
                            num(g.ci_low),
                            num(g.ci_high),
                            num(g.capacity_bound),
                            num(g.probability_bound),
                        ];
                        row.extend(tuple);
                        r.push(row);
                    }
                    r.render(cfg)?
                }
            };
            Ok(Outcome { report, summary })
        }
    }
}

/// Where the report goes: the `out` path, resolved under FBMLAB_OUT_DIR when relative,
/// or `<dir>/<command>.<ext>` when only the directory is set.
pub fn output_path(cfg: &RunConfig, out_dir: Option<&Path>) -> Option<PathBuf> {
    match (&cfg.out, out_dir) {
        (Some(o), Some(d)) if Path::new(o).is_relative() => Some(d.join(o)),
        (Some(o), _) => Some(PathBuf::from(o)),
        (None, Some(d)) => Some(d.join(format!("{}.{}", cfg.command.name(), cfg.format.extension()))),
        (None, None) => None,
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else {
        1
    }
}

fn configure_threads(value: Option<String>) -> Result<()> {
    if let Some(v) = value {
        let n: usize =
            v.parse().ok().filter(|&n| n > 0).ok_or_else(|| usage(format!("{ENV_THREADS}: bad value '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("{ENV_THREADS}: {e}")))?;
    }
    Ok(())
}

/// Binary entry point; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = (|| {
        configure_threads(std::env::var(ENV_THREADS).ok())?;
        let cfg = config_from_cli(&cli)?;
        let out = execute(&cfg)?;
        let dir = std::env::var_os(ENV_OUT_DIR).map(PathBuf::from);
        match output_path(&cfg, dir.as_deref()) {
            Some(path) => {
                write_atomic(&path, &out.report)?;
                println!("{}", out.summary);
                println!("wrote {}", path.display());
            }
            None => {
                std::io::stdout().write_all(&out.report)?;
                eprintln!("{}", out.summary);
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
