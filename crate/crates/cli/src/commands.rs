//! Subcommands and their reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use posidyn::certify::{
    certify_box, certify_gas, check_strict_sub_equilibrium, disprove_gas, linear_report, reverify, Certificate,
    DisproofConfig, GasConfig, LinearSystemDef,
};
use posidyn::compare::{make_comparison, verify_sandwich_lower, verify_sandwich_upper, SandwichConfig};
use posidyn::dde::{integrate, Direction, IntegratorConfig, Trajectory};
use posidyn::equilibria::{find_equilibria, EquilibriumSet, DEFAULT_TOL};
use posidyn::model::{HistorySegment, OrderInterval, SystemDef};
use posidyn::props::{
    check_cooperative, check_homogeneous, check_order_preserving, check_positivity_condition, check_quasimonotone,
    check_subhomogeneous, PropertyReport, SampledCheckConfig, DEFAULT_LAMBDAS,
};
use posidyn::systems::{self, GasClaim, NamedSystem};
use posidyn::{Error as CoreError, ErrorClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::Expr;
use crate::output::{trajectory_csv, trajectory_svg, write_atomic, write_json};
use crate::sysfile::{history_from, parse_system_file, SysFileError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_VERIFIED: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_REPRODUCTION: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

const DEFAULT_STEP: f64 = 1e-2;
const DEFAULT_T_END: f64 = 100.0;
/// Upper end of the default `[0, c]^n` boxes for checks and searches.
const DEFAULT_BOX_TOP: f64 = 3.0;

const BOX_CONVERGENCE_TOL: f64 = 1e-3;
const GAS_CONVERGENCE_TOL: f64 = 1e-4;
const INVARIANCE_TOL: f64 = 1e-7;
const MATCH_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-9;
const RANDOM_HISTORIES: usize = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    SysFile(#[from] SysFileError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("failed claims: {}", .0.join(", "))]
    Reproduction(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::SysFile(SysFileError::Io { .. }) => EXIT_IO,
            CliError::SysFile(SysFileError::Core(e)) | CliError::Core(e) => match e.class() {
                ErrorClass::Integration => EXIT_INTEGRATION,
                ErrorClass::Hypothesis => EXIT_HYPOTHESIS,
                ErrorClass::Usage => EXIT_USAGE,
            },
            CliError::SysFile(_) => EXIT_USAGE,
            CliError::Reproduction(_) => EXIT_REPRODUCTION,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "posidyn",
    version,
    about = "Simulate and certify positive monotone systems with time-varying delays"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "POSIDYN_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Seed for every randomized search and sample.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Record wall time in report.json; the file is then no longer
    /// reproducible byte for byte.
    #[arg(long, global = true)]
    pub record_time: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a system and write trajectory.csv and trajectory.svg.
    Simulate(SimulateArgs),
    /// Run sampled structural checks on a box.
    Check(CheckArgs),
    /// Build a stability or instability certificate.
    Certify(CertifyArgs),
    /// Run the full pipeline for a built-in system and assert its claims.
    Reproduce(ReproduceArgs),
    /// List built-in systems.
    List,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in id or path to a system file.
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Constant or expression in t, scalar or tuple, e.g. "0.5", "(-2,-4)",
    /// "(1 + 0.1*sin(t), 2)".
    #[arg(long, allow_hyphen_values = true)]
    pub history: Option<String>,
    /// Replace every delay by tau_max.
    #[arg(long)]
    pub constant_delays: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Cooperative,
    Quasimonotone,
    OrderPreserving,
    SubHomogeneous,
    Homogeneous,
    Positivity,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub system: String,
    /// "LO:HI", e.g. "0:3" or "(0,0):(3,3)"; defaults to [0, 3]^n.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Degree for the (sub-)homogeneity checks.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "cooperative,quasimonotone,order-preserving,sub-homogeneous,positivity"
    )]
    pub checks: Vec<CheckKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Box,
    Gas,
    Disprove,
    Linear,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Built-in id or system file; optional for --mode linear with --a/--b.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Super-equilibrium corner for --mode box.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Sub-equilibrium corner for --mode box.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    /// Equilibrium for --mode gas/disprove; defaults to the least
    /// equilibrium found in [0, 3]^n.
    #[arg(long, allow_hyphen_values = true)]
    pub x_star: Option<String>,
    /// Search box for --mode disprove; defaults to [0, 3]^n.
    #[arg(long, allow_hyphen_values = true)]
    pub search_box: Option<String>,
    /// Hypothesis-check box for --mode gas.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub region: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub ray_samples: usize,
    /// Grid points per dimension (equilibrium search, or disproof grid).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Check samples (box, gas) or random disproof samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Metzler matrix A as JSON rows, e.g. "[[-1]]".
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Non-negative matrix B as JSON rows.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Built-in system id.
    pub id: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Claim {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything one invocation did; written as report.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub system: String,
    pub config: Value,
    pub verdicts: Vec<Claim>,
    pub certificates: Vec<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_state: Option<Vec<f64>>,
    /// Relative to the output directory.
    pub files: Vec<String>,
    pub details: Value,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    fn new(argv: &[String], system: &str, config: Value) -> Self {
        RunReport {
            command: argv.to_vec(),
            system: system.to_string(),
            config,
            verdicts: Vec::new(),
            certificates: Vec::new(),
            terminal_state: None,
            files: Vec::new(),
            details: Value::Null,
            success: true,
            wall_time_s: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.success {
            EXIT_OK
        } else {
            EXIT_NOT_VERIFIED
        }
    }
}

/// Runs `cli`; `argv` (without the program name) is echoed in the report.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<RunReport> {
    let started = Instant::now();
    let ctx = Ctx {
        out: cli.out.clone(),
        seed: cli.seed,
    };
    let (mut report, dir) = match &cli.command {
        Command::Simulate(a) => (simulate(&ctx, a, argv)?, ctx.out.clone()),
        Command::Check(a) => (check(&ctx, a, argv)?, ctx.out.clone()),
        Command::Certify(a) => (certify(&ctx, a, argv)?, ctx.out.clone()),
        Command::Reproduce(a) => return reproduce(&ctx, a, argv, cli.record_time.then_some(started)),
        Command::List => {
            for id in systems::IDS {
                let named = systems::get(id)?;
                println!("{id:<12} {}", named.meta.summary);
            }
            return Ok(RunReport::new(argv, "", Value::Null));
        }
    };
    if cli.record_time {
        report.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    save_report(&dir, &mut report)?;
    Ok(report)
}

struct Ctx {
    out: PathBuf,
    seed: u64,
}

fn save_report(dir: &Path, report: &mut RunReport) -> CliResult<()> {
    report.files.push("report.json".into());
    let path = dir.join("report.json");
    write_json(&path, report).map_err(|source| CliError::Io { path, source })
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> CliResult<()> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|source| CliError::Io { path, source })?;
    files.push(name.to_string());
    Ok(())
}

fn write_certificate(dir: &Path, name: &str, cert: &Certificate, files: &mut Vec<String>) -> CliResult<()> {
    let path = dir.join(name);
    write_json(&path, cert).map_err(|source| CliError::Io { path, source })?;
    files.push(name.to_string());
    Ok(())
}

fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory, title: &str, files: &mut Vec<String>) -> CliResult<()> {
    write_file(dir, &format!("{stem}.csv"), trajectory_csv(traj).as_bytes(), files)?;
    write_file(dir, &format!("{stem}.svg"), trajectory_svg(traj, title).as_bytes(), files)
}

/// A system picked by `--system`.
struct Target {
    label: String,
    sys: SystemDef,
    history: Option<HistorySegment>,
    linear: Option<LinearSystemDef>,
    named: Option<NamedSystem>,
}

fn resolve(spec: &str) -> CliResult<Target> {
    if systems::IDS.contains(&spec) {
        let named = systems::get(spec)?;
        return Ok(Target {
            label: spec.to_string(),
            sys: named.sys.clone(),
            history: None,
            linear: named.meta.linear.clone(),
            named: Some(named),
        });
    }
    let path = Path::new(spec);
    if !path.exists() && !spec.contains(['/', '\\', '.']) {
        return Err(CliError::Usage(format!(
            "unknown system {spec:?}: not a built-in id ({}) and no such file",
            systems::IDS.join(", ")
        )));
    }
    let loaded = parse_system_file(path)?;
    Ok(Target {
        label: spec.to_string(),
        sys: loaded.sys,
        history: loaded.history,
        linear: loaded.linear,
        named: None,
    })
}

/// Whether the opening parenthesis of `s` closes at its last character.
fn wrapped(s: &str) -> bool {
    if !(s.starts_with('(') && s.ends_with(')')) {
        return false;
    }
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return i == s.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// `"e"` (broadcast) or `"(e1, ..., en)"`.
fn parse_components(text: &str, n: usize, vars: &[&str], what: &str) -> CliResult<Vec<Expr>> {
    let s = text.trim();
    let inner = if wrapped(s) { &s[1..s.len() - 1] } else { s };
    let parts = split_top_level(inner, ',');
    let exprs = parts
        .iter()
        .map(|p| Expr::parse(p.trim(), vars).map_err(|e| CliError::Usage(format!("{what} {p:?}: {e}"))))
        .collect::<CliResult<Vec<Expr>>>()?;
    match exprs.len() {
        1 => Ok(vec![exprs[0].clone(); n]),
        k if k == n => Ok(exprs),
        k => Err(CliError::Usage(format!("{what}: expected 1 or {n} components, found {k}"))),
    }
}

pub fn parse_vector(text: &str, n: usize, what: &str) -> CliResult<Vec<f64>> {
    Ok(parse_components(text, n, &[], what)?.iter().map(|e| e.eval(&[])).collect())
}

pub fn parse_box(text: &str, n: usize, what: &str) -> CliResult<OrderInterval> {
    let parts = split_top_level(text.trim(), ':');
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("{what}: expected LO:HI, got {text:?}")));
    }
    let lo = parse_vector(parts[0], n, what)?;
    let hi = parse_vector(parts[1], n, what)?;
    Ok(OrderInterval::new(lo, hi)?)
}

fn default_box(n: usize) -> OrderInterval {
    OrderInterval::cube(n, 0.0, DEFAULT_BOX_TOP).expect("valid cube")
}

fn parse_matrix(text: &str, what: &str) -> CliResult<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{what}: {e}")))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!("{what}: expected a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn euclid(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn simulate(ctx: &Ctx, a: &SimulateArgs, argv: &[String]) -> CliResult<RunReport> {
    let target = resolve(&a.system)?;
    let sys = if a.constant_delays {
        make_comparison(&target.sys)?.derived
    } else {
        target.sys.clone()
    };
    let t_end = a
        .t_end
        .or(target.named.as_ref().map(|n| n.meta.t_end))
        .unwrap_or(DEFAULT_T_END);
    let n = sys.dim();
    let phi = match (&a.history, target.history) {
        (Some(h), _) => history_from(parse_components(h, n, &["t"], "--history")?, sys.tau_max()),
        (None, Some(h)) => h,
        (None, None) => HistorySegment::constant(vec![1.0; n], sys.tau_max()),
    };
    let cfg = IntegratorConfig::new(a.step, t_end);
    let mut report = RunReport::new(
        argv,
        &target.label,
        json!({
            "t_end": t_end,
            "step": a.step,
            "history": a.history.clone().unwrap_or_else(|| "default".into()),
            "constant_delays": a.constant_delays,
            "tau_max": sys.tau_max(),
        }),
    );
    log::info!("integrating {} on [0, {t_end}] with h = {}", target.label, a.step);
    let traj = integrate(&sys, &phi, &cfg)?;
    write_trajectory(&ctx.out, "trajectory", &traj, &target.label, &mut report.files)?;
    let x = traj.final_state().to_vec();
    println!("x({}) = {x:?}", traj.last_time());
    println!("wrote {} mesh points to {}", traj.len(), ctx.out.join("trajectory.csv").display());
    report.terminal_state = Some(x);
    Ok(report)
}

fn property_claim(name: &str, r: posidyn::Result<PropertyReport>) -> (Claim, Option<PropertyReport>) {
    match r {
        Ok(rep) => {
            let detail = match &rep.witness {
                Some(w) => format!("witness {w:?}"),
                None => format!("{} samples on {}", rep.samples_used, rep.region),
            };
            let claim = Claim {
                name: name.into(),
                passed: rep.passed(),
                detail,
            };
            (claim, Some(rep))
        }
        Err(e) => (
            Claim {
                name: name.into(),
                passed: false,
                detail: format!("error: {e}"),
            },
            None,
        ),
    }
}

fn print_claims(claims: &[Claim]) {
    let width = claims.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in claims {
        let verdict = match (c.passed, c.detail.starts_with("error:")) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "ERROR",
        };
        println!("{:<width$}  {verdict:<5}  {}", c.name, c.detail);
    }
}

fn check(ctx: &Ctx, a: &CheckArgs, argv: &[String]) -> CliResult<RunReport> {
    let target = resolve(&a.system)?;
    let sys = &target.sys;
    let n = sys.dim();
    let region = match &a.region {
        Some(b) => parse_box(b, n, "--box")?,
        None => default_box(n),
    };
    let cfg = SampledCheckConfig::new(region.clone())
        .with_samples(a.samples)
        .with_seed(ctx.seed);
    let mut report = RunReport::new(
        argv,
        &target.label,
        json!({
            "box": region,
            "samples": a.samples,
            "alpha": a.alpha,
            "seed": ctx.seed,
        }),
    );
    let (f, g) = (sys.f().as_ref(), sys.g().as_ref());
    let mut detailed = Vec::new();
    let mut push = |name: &str, r: posidyn::Result<PropertyReport>, report: &mut RunReport| {
        let (claim, rep) = property_claim(name, r);
        report.verdicts.push(claim);
        detailed.extend(rep);
    };
    let mut positivity = None;
    for kind in &a.checks {
        match kind {
            CheckKind::Cooperative => push("cooperative_f", check_cooperative(f, &cfg), &mut report),
            CheckKind::Quasimonotone => push("quasimonotone_f", check_quasimonotone(f, &cfg), &mut report),
            CheckKind::OrderPreserving => push("order_preserving_g", check_order_preserving(g, &cfg), &mut report),
            CheckKind::SubHomogeneous => {
                push("sub_homogeneous_f", check_subhomogeneous(f, a.alpha, &cfg, &DEFAULT_LAMBDAS), &mut report);
                push("sub_homogeneous_g", check_subhomogeneous(g, a.alpha, &cfg, &DEFAULT_LAMBDAS), &mut report);
            }
            CheckKind::Homogeneous => {
                push("homogeneous_f", check_homogeneous(f, a.alpha, &cfg), &mut report);
                push("homogeneous_g", check_homogeneous(g, a.alpha, &cfg), &mut report);
            }
            CheckKind::Positivity => {
                let claim = match check_positivity_condition(sys) {
                    Ok(p) => {
                        let c = Claim {
                            name: "positivity".into(),
                            passed: p.holds,
                            detail: format!("f(0)+g(0) = {:?}", p.value),
                        };
                        positivity = Some(p);
                        c
                    }
                    Err(e) => Claim {
                        name: "positivity".into(),
                        passed: false,
                        detail: format!("error: {e}"),
                    },
                };
                report.verdicts.push(claim);
            }
        }
    }
    print_claims(&report.verdicts);
    report.success = report.verdicts.iter().all(|c| c.passed);
    report.details = json!({ "properties": detailed, "positivity": positivity });
    Ok(report)
}

/// Least (by coordinate sum) equilibrium in `region`, with round-off
/// below `1e-12` snapped to zero.
fn least_equilibrium(sys: &SystemDef, region: &OrderInterval, grid: usize) -> CliResult<Vec<f64>> {
    let eqset = find_equilibria(sys, region, grid, DEFAULT_TOL)?;
    let best = eqset
        .in_box(region)
        .min_by(|a, b| a.iter().sum::<f64>().total_cmp(&b.iter().sum::<f64>()))
        .map(|p| p.iter().map(|v| if v.abs() < 1e-12 { 0.0 } else { *v }).collect());
    best.ok_or_else(|| {
        CliError::Core(CoreError::Hypothesis {
            property: "nonnegative_equilibrium".into(),
            detail: format!("no equilibrium found in {region}"),
        })
    })
}

fn certify(ctx: &Ctx, a: &CertifyArgs, argv: &[String]) -> CliResult<RunReport> {
    let target = match &a.system {
        Some(s) => Some(resolve(s)?),
        None => None,
    };
    let need_target = || {
        target
            .as_ref()
            .ok_or_else(|| CliError::Usage("--system is required for this mode".into()))
    };
    let label = target.as_ref().map_or_else(|| "A/B".to_string(), |t| t.label.clone());
    let mut config = json!({ "mode": format!("{:?}", a.mode).to_lowercase(), "seed": ctx.seed });
    let cert: Option<Certificate> = match a.mode {
        Mode::Box => {
            let t = need_target()?;
            let n = t.sys.dim();
            let req = |v: &Option<String>, flag: &str| {
                v.clone().ok_or_else(|| CliError::Usage(format!("--mode box needs {flag}")))
            };
            let w = parse_vector(&req(&a.w, "--w")?, n, "--w")?;
            let v = parse_vector(&req(&a.v, "--v")?, n, "--v")?;
            let region = OrderInterval::new(w.clone(), v.clone())?;
            let samples = a.samples.unwrap_or(2000);
            let grid = a.grid.unwrap_or(15);
            config["samples"] = json!(samples);
            config["grid"] = json!(grid);
            let cfg = SampledCheckConfig::new(region.clone())
                .with_samples(samples)
                .with_seed(ctx.seed);
            for (property, rep) in [
                ("cooperative", check_cooperative(t.sys.f().as_ref(), &cfg)?),
                ("order_preserving", check_order_preserving(t.sys.g().as_ref(), &cfg)?),
            ] {
                if !rep.passed() {
                    return Err(CoreError::Hypothesis {
                        property: property.into(),
                        detail: format!("violated on {region}: {:?}", rep.witness),
                    }
                    .into());
                }
            }
            let eqset = find_equilibria(&t.sys, &region, grid, DEFAULT_TOL)?;
            Some(certify_box(&t.sys, &w, &v, &eqset)?)
        }
        Mode::Gas => {
            let t = need_target()?;
            let n = t.sys.dim();
            let region = a.region.as_deref().map(|b| parse_box(b, n, "--box")).transpose()?;
            let grid = a.grid.unwrap_or(15);
            let x_star = match &a.x_star {
                Some(x) => parse_vector(x, n, "--x-star")?,
                None => least_equilibrium(&t.sys, region.as_ref().unwrap_or(&default_box(n)), grid)?,
            };
            let cfg = GasConfig {
                alpha: a.alpha,
                ray_samples: a.ray_samples,
                gamma_max: a.gamma_max,
                region,
                check_samples: a.samples.unwrap_or(2000),
                equilibrium_grid: grid,
                seed: ctx.seed,
            };
            config["x_star"] = json!(x_star);
            config["alpha"] = json!(cfg.alpha);
            config["gamma_max"] = json!(cfg.gamma_max);
            config["ray_samples"] = json!(cfg.ray_samples);
            config["check_samples"] = json!(cfg.check_samples);
            config["grid"] = json!(grid);
            certify_gas(&t.sys, &x_star, &cfg)?
        }
        Mode::Disprove => {
            let t = need_target()?;
            let n = t.sys.dim();
            let search_box = match &a.search_box {
                Some(b) => parse_box(b, n, "--search-box")?,
                None => default_box(n),
            };
            let x_star = match &a.x_star {
                Some(x) => parse_vector(x, n, "--x-star")?,
                None => least_equilibrium(&t.sys, &search_box, 15)?,
            };
            let cfg = DisproofConfig {
                grid_per_dim: a.grid.unwrap_or(20),
                random_samples: a.samples.unwrap_or(10_000),
                seed: ctx.seed,
            };
            config["x_star"] = json!(x_star);
            config["search_box"] = json!(search_box);
            config["grid"] = json!(cfg.grid_per_dim);
            config["samples"] = json!(cfg.random_samples);
            disprove_gas(&t.sys, &x_star, &search_box, &cfg)?
        }
        Mode::Linear => {
            let lin = match (&a.a, &a.b) {
                (Some(am), Some(bm)) => {
                    let (am, bm) = (parse_matrix(am, "--a")?, parse_matrix(bm, "--b")?);
                    if am.nrows() != bm.nrows() {
                        return Err(CliError::Usage("--a and --b differ in size".into()));
                    }
                    LinearSystemDef::undelayed(am, bm)?
                }
                (None, None) => need_target()?
                    .linear
                    .clone()
                    .ok_or_else(|| CliError::Usage(format!("{label} has no linear form; pass --a and --b")))?,
                _ => return Err(CliError::Usage("--a and --b go together".into())),
            };
            config["a"] = json!(lin.a().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
            config["b"] = json!(lin.b().row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
            Some(linear_report(&lin)?)
        }
    };
    let mut report = RunReport::new(argv, &label, config);
    match cert {
        Some(c) => {
            print!("{c}");
            write_certificate(&ctx.out, "certificate.json", &c, &mut report.files)?;
            report.success = c.verified;
            report.verdicts.push(Claim {
                name: c.kind.to_string(),
                passed: c.verified,
                detail: c.conclusion.clone(),
            });
            report.certificates.push(c);
        }
        None => {
            let detail = match a.mode {
                Mode::Disprove => "no super-equilibrium witness found in the search box",
                _ => "no strict sub-equilibrium found along the sampled rays",
            };
            println!("no certificate: {detail}");
            report.success = false;
            report.verdicts.push(Claim {
                name: format!("{:?}", a.mode).to_lowercase(),
                passed: false,
                detail: detail.into(),
            });
        }
    }
    Ok(report)
}

struct Repro<'a> {
    dir: PathBuf,
    seed: u64,
    named: &'a NamedSystem,
    report: RunReport,
    cfg: IntegratorConfig,
}

impl Repro<'_> {
    fn claim(&mut self, name: &str, outcome: posidyn::Result<(bool, String)>) {
        let (passed, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        log::info!("{name}: {passed} ({detail})");
        self.report.verdicts.push(Claim {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn sys(&self) -> &SystemDef {
        &self.named.sys
    }

    fn simulate(&mut self, history: &[f64]) -> posidyn::Result<Trajectory> {
        let phi = HistorySegment::constant(history.to_vec(), self.sys().tau_max());
        integrate(self.sys(), &phi, &self.cfg)
    }

    fn save_trajectory(&mut self, stem: &str, traj: &Trajectory, title: &str) -> CliResult<()> {
        write_trajectory(&self.dir, stem, traj, title, &mut self.report.files)
    }

    fn save_certificate(&mut self, name: &str, cert: Certificate) -> CliResult<()> {
        write_certificate(&self.dir, name, &cert, &mut self.report.files)?;
        self.report.certificates.push(cert);
        Ok(())
    }

    /// Forward simulation from a constant history, checked by `judge`.
    fn run_and_judge(
        &mut self,
        name: &str,
        history: &[f64],
        judge: impl FnOnce(&Trajectory) -> (bool, String),
    ) -> CliResult<()> {
        match self.simulate(history) {
            Ok(traj) => {
                let title = format!("{}: history {history:?}", self.named.id);
                self.save_trajectory(name, &traj, &title)?;
                let verdict = judge(&traj);
                self.claim(name, Ok(verdict));
            }
            Err(e) => self.claim(name, Err(e)),
        }
        Ok(())
    }

    fn sandwich_upper(&mut self, name: &str, v: &[f64]) {
        let cfg = SandwichConfig {
            integrator: self.cfg,
            ..SandwichConfig::default()
        };
        let outcome = verify_sandwich_upper(self.sys(), v, &cfg).map(|r| {
            let mono = posidyn::compare::verify_trajectory_monotone(&r.comparison, Direction::NonIncreasing, MONOTONE_TOL);
            (
                r.holds && mono,
                format!(
                    "x <= y from {v:?} up to t = {}: max violation {:e}, comparison non-increasing: {mono}",
                    r.horizon, r.max_violation
                ),
            )
        });
        self.claim(name, outcome);
    }

    fn sandwich_lower(&mut self, name: &str, w: &[f64]) {
        let cfg = SandwichConfig {
            integrator: self.cfg,
            ..SandwichConfig::default()
        };
        let outcome = verify_sandwich_lower(self.sys(), w, &cfg).map(|r| {
            let mono = posidyn::compare::verify_trajectory_monotone(&r.comparison, Direction::NonDecreasing, MONOTONE_TOL);
            (
                r.holds && mono,
                format!(
                    "y <= x from {w:?} up to t = {}: max violation {:e}, comparison non-decreasing: {mono}",
                    r.horizon, r.max_violation
                ),
            )
        });
        self.claim(name, outcome);
    }
}

fn same_points(found: &[Vec<f64>], expected: &[Vec<f64>]) -> bool {
    found.len() == expected.len()
        && expected
            .iter()
            .all(|e| found.iter().any(|p| inf_dist(p, e) <= MATCH_TOL))
}

fn reproduce(ctx: &Ctx, a: &ReproduceArgs, argv: &[String], started: Option<Instant>) -> CliResult<RunReport> {
    let named = systems::get(&a.id)?;
    let meta = &named.meta;
    let cfg = IntegratorConfig::new(DEFAULT_STEP, meta.t_end);
    let config = json!({
        "t_end": meta.t_end,
        "step": DEFAULT_STEP,
        "seed": ctx.seed,
        "delays": meta.delays,
    });
    let mut r = Repro {
        dir: ctx.out.join(named.id),
        seed: ctx.seed,
        named: &named,
        report: RunReport::new(argv, named.id, config),
        cfg,
    };
    let sys = named.sys.clone();

    r.claim(
        "positivity_condition",
        check_positivity_condition(&sys).map(|p| {
            (
                p.holds == meta.positive,
                format!("f(0)+g(0) = {:?}; expected positive = {}", p.value, meta.positive),
            )
        }),
    );
    let lo: Vec<f64> = meta.equilibrium_box.lo().iter().zip(sys.domain().lo()).map(|(a, b)| a.max(*b)).collect();
    let check_box = OrderInterval::new(lo, meta.equilibrium_box.hi().to_vec())?;
    let check_cfg = SampledCheckConfig::new(check_box).with_seed(r.seed);
    for (name, rep) in [
        ("cooperative_f", check_cooperative(sys.f().as_ref(), &check_cfg)),
        ("order_preserving_g", check_order_preserving(sys.g().as_ref(), &check_cfg)),
    ] {
        let (claim, _) = property_claim(name, rep);
        r.report.verdicts.push(claim);
    }

    let eqset: Option<EquilibriumSet> = match find_equilibria(&sys, &meta.equilibrium_box, 15, DEFAULT_TOL) {
        Ok(e) => {
            let ok = same_points(&e.points, &meta.equilibria);
            r.claim("equilibria", Ok((ok, format!("found {:?} in {}", e.points, e.search_box))));
            Some(e)
        }
        Err(e) => {
            r.claim("equilibria", Err(e));
            None
        }
    };

    for (k, b) in meta.boxes.iter().enumerate() {
        let tag = format!("box{}", k + 1);
        if let Some(eqset) = &eqset {
            match certify_box(&sys, &b.w, &b.v, eqset) {
                Ok(cert) => {
                    let at = cert.equilibrium.as_ref().is_some_and(|x| inf_dist(x, &b.equilibrium) <= MATCH_TOL);
                    let ok = cert.verified && at;
                    r.claim(
                        &format!("{tag}_certificate"),
                        Ok((ok, format!("[{:?}, {:?}] -> {:?}", b.w, b.v, cert.equilibrium))),
                    );
                    r.save_certificate(&format!("certificate_{tag}.json"), cert)?;
                }
                Err(e) => r.claim(&format!("{tag}_certificate"), Err(e)),
            }
        }
        let target = b.equilibrium.clone();
        r.run_and_judge(&format!("trajectory_{tag}"), &b.w, |traj| {
            let d = inf_dist(traj.final_state(), &target);
            (
                d <= BOX_CONVERGENCE_TOL,
                format!("|x({}) - {target:?}| = {d:e}", traj.last_time()),
            )
        })?;
        r.sandwich_upper(&format!("{tag}_sandwich_upper"), &b.v);
        r.sandwich_lower(&format!("{tag}_sandwich_lower"), &b.w);
    }

    match &meta.gas {
        GasClaim::None => {}
        GasClaim::Certified { equilibrium, v } => {
            let gas_cfg = GasConfig {
                seed: r.seed,
                ..GasConfig::default()
            };
            match certify_gas(&sys, equilibrium, &gas_cfg) {
                Ok(Some(cert)) => {
                    let again = reverify(&sys, &cert).unwrap_or(false);
                    r.claim(
                        "gas_certificate",
                        Ok((cert.verified && again, format!("v = {:?}, re-verified: {again}", cert.v))),
                    );
                    r.save_certificate("certificate_gas.json", cert)?;
                }
                Ok(None) => r.claim("gas_certificate", Ok((false, "no strict sub-equilibrium found".into()))),
                Err(e) => r.claim("gas_certificate", Err(e)),
            }
            if let Some(lin) = &meta.linear {
                match linear_report(lin) {
                    Ok(cert) => {
                        r.claim("linear_certificate", Ok((cert.verified, format!("v = {:?}", cert.v))));
                        r.save_certificate("certificate_linear.json", cert)?;
                    }
                    Err(e) => r.claim("linear_certificate", Err(e)),
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
            let n = sys.dim();
            for k in 1..=RANDOM_HISTORIES {
                let phi: Vec<f64> = (0..n).map(|_| DEFAULT_BOX_TOP * rng.random::<f64>()).collect();
                let eq = equilibrium.clone();
                r.run_and_judge(&format!("trajectory_random{k}"), &phi, |traj| {
                    let d = inf_dist(traj.final_state(), &eq);
                    (
                        d <= GAS_CONVERGENCE_TOL,
                        format!("|x({}) - {eq:?}| = {d:e}", traj.last_time()),
                    )
                })?;
            }
            r.sandwich_upper("gas_sandwich_upper", v);
        }
        GasClaim::Disproved { equilibrium, w, search_box } => {
            let cfg = DisproofConfig {
                seed: r.seed,
                ..DisproofConfig::default()
            };
            match disprove_gas(&sys, equilibrium, search_box, &cfg) {
                Ok(Some(cert)) => {
                    r.claim(
                        "disproof_witness",
                        Ok((cert.verified, format!("w = {:?} in {search_box}", cert.w))),
                    );
                    r.save_certificate("certificate_disproof.json", cert)?;
                }
                Ok(None) => r.claim("disproof_witness", Ok((false, format!("none found in {search_box}")))),
                Err(e) => r.claim("disproof_witness", Err(e)),
            }
            let w0 = w.clone();
            r.run_and_judge("trajectory_from_w", w, |traj| {
                let worst = traj
                    .forward()
                    .flat_map(|(_, x)| x.iter().zip(&w0).map(|(a, b)| a - b).collect::<Vec<_>>())
                    .fold(f64::INFINITY, f64::min);
                (
                    worst >= -INVARIANCE_TOL,
                    format!("min over mesh of x(t) - w = {worst:e} up to t = {}", traj.last_time()),
                )
            })?;
            r.sandwich_lower("disproof_sandwich_lower", w);
        }
        GasClaim::NotGas {
            equilibrium,
            sub_equilibrium,
            search_box,
            nonconvergence,
        } => {
            let cfg = DisproofConfig {
                seed: r.seed,
                ..DisproofConfig::default()
            };
            r.claim(
                "no_disproof_witness",
                disprove_gas(&sys, equilibrium, search_box, &cfg).map(|c| match c {
                    None => (true, format!("none in {search_box}")),
                    Some(c) => (false, format!("unexpected witness {:?}", c.w)),
                }),
            );
            r.claim(
                "strict_sub_equilibrium",
                check_strict_sub_equilibrium(&sys, sub_equilibrium)
                    .map(|c| (c.holds, format!("f(v)+g(v) = {:?} at v = {sub_equilibrium:?}", c.residual))),
            );
            let gas = certify_gas(&sys, equilibrium, &GasConfig { seed: r.seed, ..GasConfig::default() });
            let refused = match gas {
                Err(CoreError::Hypothesis { property, detail }) => (true, format!("refused: {property}: {detail}")),
                Err(e) => (false, format!("error: {e}")),
                Ok(_) => (false, "certify_gas did not refuse".into()),
            };
            r.claim("gas_refused", Ok(refused));
            let delta = nonconvergence.delta;
            let eq = equilibrium.clone();
            r.cfg = IntegratorConfig::new(DEFAULT_STEP, nonconvergence.t_end);
            r.run_and_judge("trajectory_nonconvergent", &nonconvergence.history, |traj| {
                let diff: Vec<f64> = traj.final_state().iter().zip(&eq).map(|(a, b)| a - b).collect();
                let d = euclid(&diff);
                (d >= delta, format!("|x({}) - x*| = {d} >= {delta}", traj.last_time()))
            })?;
        }
    }

    print_claims(&r.report.verdicts);
    let failed: Vec<String> = r
        .report
        .verdicts
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.clone())
        .collect();
    r.report.success = failed.is_empty();
    if let Some(t) = started {
        r.report.wall_time_s = Some(t.elapsed().as_secs_f64());
    }
    let dir = r.dir.clone();
    save_report(&dir, &mut r.report)?;
    if failed.is_empty() {
        Ok(r.report)
    } else {
        Err(CliError::Reproduction(failed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuples_and_broadcast() {
        assert_eq!(parse_vector("(-2,-4)", 2, "x").unwrap(), vec![-2.0, -4.0]);
        assert_eq!(parse_vector("0.5", 3, "x").unwrap(), vec![0.5; 3]);
        assert_eq!(parse_vector("(1+1)*2", 2, "x").unwrap(), vec![4.0, 4.0]);
        assert_eq!(parse_vector("(1, 2^-1)", 2, "x").unwrap(), vec![1.0, 0.5]);
        assert!(matches!(parse_vector("(1,2,3)", 2, "x"), Err(CliError::Usage(_))));
        assert!(matches!(parse_vector("t", 1, "x"), Err(CliError::Usage(_))));
    }

    #[test]
    fn boxes() {
        let b = parse_box("(-3,-5):(1,-1)", 2, "b").unwrap();
        assert_eq!(b.lo(), &[-3.0, -5.0]);
        assert_eq!(b.hi(), &[1.0, -1.0]);
        assert_eq!(parse_box("0:3", 2, "b").unwrap().hi(), &[3.0, 3.0]);
        assert!(parse_box("3:0", 1, "b").is_err());
        assert!(parse_box("0", 1, "b").is_err());
    }

    #[test]
    fn history_expressions() {
        let e = parse_components("(1 + sin(t), 2)", 2, &["t"], "h").unwrap();
        assert_eq!(e[0].eval(&[0.0]), 1.0);
        assert_eq!(e[1].as_constant(), Some(2.0));
    }

    #[test]
    fn matrices() {
        assert_eq!(parse_matrix("[[-1]]", "a").unwrap()[(0, 0)], -1.0);
        assert!(parse_matrix("[[1, 2]]", "a").is_err());
        assert!(parse_matrix("nope", "a").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Core(CoreError::Computation(String::new())).exit_code(), EXIT_INTEGRATION);
        let h = CoreError::Hypothesis {
            property: "p".into(),
            detail: String::new(),
        };
        assert_eq!(CliError::Core(h).exit_code(), EXIT_HYPOTHESIS);
        assert_eq!(CliError::Reproduction(vec![]).exit_code(), EXIT_REPRODUCTION);
    }
}
