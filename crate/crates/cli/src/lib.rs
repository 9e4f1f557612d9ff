//! `chondro` command-line front end.
//!
//! Machine-readable results go to stdout as `key=value` pairs; prose goes to
//! stderr. Exit codes: 0 success, 1 verification failure, 2 usage or
//! parameter error, 3 numerical divergence.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use chondro_core::model::{steady_state, ModelParams};
use chondro_core::scenarios::{builtin_scenario, builtin_scenarios, parse_config, run_scenario, ScenarioSpec};
use chondro_core::stability::{hopf_diagnostics, HopfStatus};
use chondro_core::verify::{run_suite, Suite};
use chondro_core::{Domain, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const SEED_ENV: &str = "CHONDRO_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    VerificationFailed = 1,
    Usage = 2,
    Divergence = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Parser)]
#[command(name = "chondro", version, about = "Cartilage regeneration model: steady state, stability analysis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Homogeneous steady state and its reaction residual.
    SteadyState(ParamArgs),
    /// Critical taxis sensitivity b_c and Hopf diagnostics.
    Stability(StabilityArgs),
    /// Run a built-in scenario or a config file.
    Simulate(SimulateArgs),
    /// Run invariant suites.
    Verify(VerifyArgs),
    /// List built-in scenarios.
    Scenarios,
}

/// Model parameters: a base set (`--config` or `--reference`) with
/// per-parameter overrides, or a complete inline set.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Run config whose `params` (and `geometry`) are used.
    #[arg(long, conflicts_with = "reference")]
    pub config: Option<PathBuf>,
    /// Start from the reference parameter set.
    #[arg(long)]
    pub reference: bool,
    #[arg(long, allow_negative_numbers = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2: Option<f64>,
    #[arg(long = "kc1", allow_negative_numbers = true)]
    pub kc1: Option<f64>,
    #[arg(long = "kc2", allow_negative_numbers = true)]
    pub kc2: Option<f64>,
    /// Use c2/Kc2 in the logistic factor.
    #[arg(long)]
    pub logistic_k2_variant: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// `interval:L` or `rectangle:LXxLY`; defaults to the config geometry, else `interval:1`.
    #[arg(long, value_parser = parse_geometry)]
    pub geometry: Option<Domain>,
    /// Also print every examined eigenvalue with its ψ value.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scenario", "config"])))]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Noise seed; overrides the config and `CHONDRO_SEED`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Stability,
    Solver,
    Bounds,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Stability => Suite::Stability,
            SuiteArg::Solver => Suite::Solver,
            SuiteArg::Bounds => Suite::Bounds,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: SuiteArg,
}

/// Parses `interval:L` or `rectangle:LXxLY`.
pub fn parse_geometry(text: &str) -> Result<Domain, String> {
    let (kind, dims) = text
        .split_once(':')
        .ok_or_else(|| format!("expected `interval:L` or `rectangle:LXxLY`, got `{text}`"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad extent `{s}`: {e}"));
    let domain = match kind {
        "interval" => Domain::Interval { length: num(dims)? },
        "rectangle" => {
            let (lx, ly) = dims
                .split_once(['x', 'X'])
                .ok_or_else(|| format!("expected `rectangle:LXxLY`, got `{text}`"))?;
            Domain::Rectangle {
                lx: num(lx)?,
                ly: num(ly)?,
            }
        }
        other => return Err(format!("unknown geometry `{other}`")),
    };
    domain.validate().map_err(|e| e.to_string())?;
    Ok(domain)
}

/// Renders a float rounded to 15 significant digits in its shortest form,
/// so that `0.8000000000000002` prints as `0.8`. Magnitudes below `1e-4`
/// or from `1e16` up use exponent notation.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if rounded != 0.0 && !(1e-4..1e16).contains(&magnitude) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}

/// A failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Divergence { .. } | Error::LinearSolve { .. } => ExitStatus::Divergence,
            _ => ExitStatus::Usage,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(format!("output error: {e}"))
    }
}

type CliResult = Result<ExitStatus, CliError>;

fn read_config(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

impl ParamArgs {
    fn overrides(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("a1", self.a1),
            ("a2", self.a2),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("beta", self.beta),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("kc1", self.kc1),
            ("kc2", self.kc2),
        ]
    }

    /// Resolves the parameter set and the config geometry, if any.
    pub fn resolve(&self) -> Result<(ModelParams, Option<Domain>), CliError> {
        let (mut p, geometry) = match &self.config {
            Some(path) => {
                let spec = read_config(path)?;
                (spec.params, Some(spec.domain))
            }
            None if self.reference => (ModelParams::default(), None),
            None => {
                let missing: Vec<&str> = self
                    .overrides()
                    .iter()
                    .filter(|(_, v)| v.is_none())
                    .map(|(name, _)| *name)
                    .collect();
                if !missing.is_empty() {
                    return Err(CliError::usage(format!(
                        "missing required parameter(s) --{} (or pass --reference / --config)",
                        missing.join(", --")
                    )));
                }
                (ModelParams::default(), None)
            }
        };
        let slots = [
            &mut p.a1,
            &mut p.a2,
            &mut p.alpha,
            &mut p.delta,
            &mut p.beta,
            &mut p.gamma1,
            &mut p.gamma2,
            &mut p.kc1,
            &mut p.kc2,
        ];
        for (slot, (_, value)) in slots.into_iter().zip(self.overrides()) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if self.logistic_k2_variant {
            p.logistic_k2_variant = true;
        }
        Ok((p, geometry))
    }
}

pub fn cmd_steady_state(args: &ParamArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let (p, _) = args.resolve()?;
    p.validate_relaxed()?;
    let s = steady_state(&p)?;
    writeln!(
        out,
        "c1*={} c2*={} h*={} residual={}",
        fmt_num(s.c1_star),
        fmt_num(s.c2_star),
        fmt_num(s.h_star),
        fmt_num(s.residual(&p))
    )?;
    writeln!(err, "homogeneous steady state (c1*, c2*, h*) with max reaction residual")?;
    Ok(ExitStatus::Success)
}

pub fn cmd_stability(args: &StabilityArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let (p, config_geometry) = args.params.resolve()?;
    let domain = args
        .geometry
        .or(config_geometry)
        .unwrap_or(Domain::Interval { length: 1.0 });
    let report = hopf_diagnostics(&p, &domain)?;
    let (omega0, slope) = match report.hopf {
        HopfStatus::Crossing(c) => (fmt_num(c.omega0), fmt_num(c.transversality_slope)),
        _ => ("nan".into(), "nan".into()),
    };
    writeln!(
        out,
        "b_c={} j0={} k_j0={} omega0={} transversality_slope={} degenerate={}",
        fmt_num(report.b_c),
        report.j0,
        fmt_num(report.k_j0),
        omega0,
        slope,
        report.degenerate
    )?;
    if args.table {
        for e in &report.table {
            writeln!(out, "j={} k={} psi={}", e.j, fmt_num(e.k), fmt_num(e.psi))?;
        }
    }
    if !report.psi_coefficients_nonnegative {
        writeln!(err, "warning: some psi coefficient B_i is negative: {:?}", report.psi_coefficients)?;
    }
    if report.degenerate {
        writeln!(err, "the minimum of psi is attained at more than one eigenvalue; Hopf diagnostics skipped")?;
    }
    writeln!(err, "b_c is the smallest taxis sensitivity at which a spatial mode loses stability")?;
    Ok(ExitStatus::Success)
}

/// Seed precedence: `--seed`, then `CHONDRO_SEED`, then the config.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match env {
        Some(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::usage(format!("{SEED_ENV}=`{text}` is not a seed: {e}"))),
        None => Ok(config),
    }
}

pub fn cmd_simulate(args: &SimulateArgs, seed_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let mut spec = match (&args.scenario, &args.config) {
        (Some(name), None) => builtin_scenario(name)?,
        (None, Some(path)) => read_config(path)?,
        _ => return Err(CliError::usage("pass exactly one of --scenario or --config")),
    };
    spec.seed = resolve_seed(args.seed, seed_env, spec.seed)?;
    spec.validate()?;
    writeln!(err, "running `{}` into {}", spec.name, args.out.display())?;
    let report = match run_scenario(&spec, &args.out) {
        Ok(r) => r,
        Err(e) => {
            let e = CliError::from(e);
            if e.status == ExitStatus::Divergence {
                writeln!(out, "status=diverged")?;
                writeln!(out, "manifest={}", args.out.join("manifest.json").display())?;
            }
            return Err(e);
        }
    };
    let m = &report.manifest;
    writeln!(out, "status=completed")?;
    writeln!(out, "scenario={}", m.scenario)?;
    writeln!(out, "steps={}", m.steps)?;
    writeln!(out, "t_final={}", fmt_num(m.t_final))?;
    writeln!(out, "dt_min={}", m.dt_min.map_or("nan".into(), fmt_num))?;
    writeln!(out, "dt_max={}", m.dt_max.map_or("nan".into(), fmt_num))?;
    writeln!(out, "violations={}", m.violations.len())?;
    writeln!(out, "cfl_warnings={}", m.cfl_warnings)?;
    writeln!(out, "config_hash={}", m.config_hash)?;
    writeln!(out, "manifest={}", args.out.join("manifest.json").display())?;
    if !m.violations.is_empty() {
        writeln!(err, "bound monitors reported {} violation(s); see manifest.json", m.violations.len())?;
        return Ok(ExitStatus::VerificationFailed);
    }
    Ok(ExitStatus::Success)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let outcomes = run_suite(args.suite.into());
    let mut failed = Vec::new();
    for o in &outcomes {
        writeln!(out, "check={} status={}", o.name, if o.passed { "pass" } else { "fail" })?;
        writeln!(err, "{}: {}", o.name, o.detail)?;
        if !o.passed {
            failed.push(o.name);
        }
    }
    writeln!(out, "passed={} failed={}", outcomes.len() - failed.len(), failed.len())?;
    if failed.is_empty() {
        Ok(ExitStatus::Success)
    } else {
        writeln!(err, "failed checks: {}", failed.join(", "))?;
        Ok(ExitStatus::VerificationFailed)
    }
}

pub fn cmd_scenarios(out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    writeln!(
        err,
        "built-in scenarios: scenarioN-b<value> are the 1D scenarios 1-4 with taxis sensitivity b; \
         2d-gaussian and 2d-cosine are the 2D experiments on [0,10]^2"
    )?;
    for s in builtin_scenarios() {
        let (dim, nodes) = match s.domain {
            Domain::Interval { .. } => (1, s.resolution.nx.to_string()),
            Domain::Rectangle { .. } => (2, format!("{}x{}", s.resolution.nx, s.resolution.ny.unwrap_or(1))),
        };
        writeln!(
            out,
            "scenario={} dim={dim} nodes={nodes} b={} t_end={} outputs={}",
            s.name,
            fmt_num(s.b),
            fmt_num(s.t_end),
            s.output_times.len()
        )?;
    }
    Ok(ExitStatus::Success)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with_env<I, T>(args: I, seed_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() {
                ExitStatus::Usage.code()
            } else {
                let _ = write!(out, "{}", e.render());
                ExitStatus::Success.code()
            };
        }
    };
    let result = match &cli.command {
        Command::SteadyState(a) => cmd_steady_state(a, out, err),
        Command::Stability(a) => cmd_stability(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, seed_env, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Scenarios => cmd_scenarios(out, err),
    };
    match result {
        Ok(status) => status.code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.status.code()
        }
    }
}

/// Entry point used by the binary: reads `CHONDRO_SEED` from the environment.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let seed_env = std::env::var(SEED_ENV).ok();
    run_with_env(args, seed_env.as_deref(), out, err)
}
