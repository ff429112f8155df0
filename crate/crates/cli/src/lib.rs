//! Command-line driver: `run` replicated experiments to CSV, print the
//! `benchmark` value, or run the solver `selftest`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure (including
//! a failing self-test).

pub mod config;
pub mod output;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use kbsim_core::lp::{benchmark_jd, solve, LinearProgram, LpSolution};
use kbsim_core::policy::{CapacityMode, PolicyKind, ThetaCardinality};
use kbsim_core::sim::{replicate, CapacityReading, PolicySummary, Preset};

use config::{expand, Experiment, ExperimentFile};
use output::{allocation_rows, fmt6, regret_rows, write_allocations, write_regret};

pub const THREADS_ENV: &str = "KBSIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "kbsim",
    version,
    about = "Online allocation simulator with unknown click-through rates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicated simulations and write regret.csv, allocations.csv and meta.json.
    Run(RunArgs),
    /// Print the benchmark J^D(c, t) with six decimals.
    Benchmark(BenchmarkArgs),
    /// Check the simplex solver against vertex enumeration and run smoke checks.
    Selftest(SelftestArgs),
}

fn parse_snake<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| format!("unrecognised value `{s}`"))
}

/// Experiment options shared by `run` and `benchmark`; each one overrides the
/// matching key of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// JSON experiment file (a meta.json from an earlier run also works).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// iid, adv1 or adv2.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Comma-separated list of ulwe, alg_lp, alg_adv.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<PolicyKind>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated periods.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    pub resolve_cadence: Option<usize>,
    /// hard or soft.
    #[arg(long, value_parser = parse_snake::<CapacityMode>)]
    pub capacity_mode: Option<CapacityMode>,
    #[arg(long)]
    pub threshold_multiplier: Option<f64>,
    /// sum or max.
    #[arg(long, value_parser = parse_snake::<ThetaCardinality>)]
    pub theta_cardinality: Option<ThetaCardinality>,
    /// Preset horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// split (c_i = T/2) or each (c_i = T).
    #[arg(long, value_parser = parse_snake::<CapacityReading>)]
    pub capacity_reading: Option<CapacityReading>,
}

impl ExperimentArgs {
    fn as_file(&self) -> ExperimentFile {
        ExperimentFile {
            preset: self.preset,
            policies: self.policies.clone(),
            reps: self.reps,
            seed: self.seed,
            checkpoints: self.checkpoints.clone(),
            resolve_cadence: self.resolve_cadence,
            capacity_mode: self.capacity_mode,
            threshold_multiplier: self.threshold_multiplier,
            theta_cardinality: self.theta_cardinality,
            horizon: self.horizon,
            capacity_reading: self.capacity_reading,
            ..ExperimentFile::default()
        }
    }

    /// Flags over file over defaults.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                ExperimentFile::from_json(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => ExperimentFile::default(),
        };
        expand(&self.as_file().over(file)).map_err(CliError::Config)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Period t; defaults to the horizon.
    #[arg(long)]
    pub period: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = selftest::DEFAULT_CASES)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (CliError::Config(m) | CliError::Runtime(m)) = self;
        write!(f, "error: {m}")
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Worker count from `KBSIM_THREADS` (unset or 0 lets rayon decide).
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
    }
}

/// Replicates every policy of the experiment on a pool of `threads` workers.
pub fn run_experiment(exp: &Experiment, threads: usize) -> Result<Vec<PolicySummary>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime)?;
    exp.policies
        .iter()
        .map(|&p| {
            pool.install(|| replicate(&exp.config_for(p)))
                .map_err(runtime)
        })
        .collect()
}

pub fn write_outputs(
    dir: &Path,
    exp: &Experiment,
    summaries: &[PolicySummary],
    wall_secs: f64,
    threads: usize,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let open = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .map(std::io::BufWriter::new)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    };
    write_regret(&regret_rows(summaries), open("regret.csv")?).map_err(runtime)?;
    write_allocations(&allocation_rows(summaries), open("allocations.csv")?).map_err(runtime)?;

    let diagnostics: Vec<_> = summaries
        .iter()
        .map(|s| {
            json!({
                "policy": s.policy,
                "switch_count": s.switch_count(),
                "median_switch_period": s.median_switch_period(),
                "theta_star_removals": s.theta_star_removals,
                "mean_violation": s.mean_violation,
            })
        })
        .collect();
    let meta = json!({
        "config": exp.echo(),
        "preset": exp.preset,
        "seed": exp.base.base_seed,
        "versions": {
            "kbsim": env!("CARGO_PKG_VERSION"),
            "kbsim_core": kbsim_core::VERSION,
        },
        "wall_time_secs": wall_secs,
        "threads": threads,
        "diagnostics": diagnostics,
    });
    let mut f = open("meta.json")?;
    serde_json::to_writer_pretty(&mut f, &meta).map_err(runtime)?;
    f.write_all(b"\n").map_err(runtime)?;
    f.flush().map_err(runtime)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let exp = args.experiment.resolve()?;
    let threads = threads_from_env()?;
    let start = Instant::now();
    let summaries = run_experiment(&exp, threads)?;
    let wall = start.elapsed().as_secs_f64();
    write_outputs(&args.out, &exp, &summaries, wall, threads)?;
    for s in &summaries {
        if let Some(last) = s.checkpoints.last() {
            writeln!(
                out,
                "{:<8} t={:<6} mean_regret={} stderr={} switches={}/{}",
                s.policy.name(),
                last.t,
                fmt6(last.mean_regret),
                fmt6(last.stderr),
                s.switch_count(),
                s.replications
            )
            .map_err(runtime)?;
        }
    }
    writeln!(out, "wrote {}", args.out.display()).map_err(runtime)
}

fn cmd_benchmark(args: &BenchmarkArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let exp = args.experiment.resolve()?;
    let t = args.period.unwrap_or(exp.base.instance.horizon);
    if t > exp.base.instance.horizon {
        return Err(CliError::Config(format!(
            "period {t} is beyond the horizon {}",
            exp.base.instance.horizon
        )));
    }
    let v = benchmark_jd(&exp.base.instance, &exp.base.schedule, t).map_err(runtime)?;
    writeln!(out, "{}", fmt6(v)).map_err(runtime)
}

/// Self-test against an arbitrary solver; returns the exit code.
pub fn selftest_with<F>(solver: F, cases: usize, seed: u64, out: &mut dyn Write) -> i32
where
    F: Fn(&LinearProgram) -> LpSolution,
{
    let report = selftest::run_selftest(solver, cases, seed);
    let _ = writeln!(
        out,
        "oracle suite: {} cases, {} failures",
        report.oracle_cases,
        report.oracle_failures.len()
    );
    for (case, msg) in report.oracle_failures.iter().take(5) {
        let _ = writeln!(out, "  case {case}: {msg}");
    }
    for (name, result) in &report.smoke {
        let _ = match result {
            Ok(()) => writeln!(out, "smoke {name}: ok"),
            Err(m) => writeln!(out, "smoke {name}: FAILED ({m})"),
        };
    }
    if report.passed() {
        let _ = writeln!(out, "selftest passed");
        0
    } else {
        let _ = writeln!(out, "selftest FAILED");
        2
    }
}

/// Parses `args` (program name first) and executes the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Benchmark(a) => cmd_benchmark(a, out),
        Command::Selftest(a) => return selftest_with(solve, a.cases, a.seed, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
