//! Command-line front end: `run`, `sweep`, `verify` and `bench`.
//!
//! Settings resolve as built-in defaults, then a `key = value` file given by
//! `--config`, then explicit flags.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::TrialAggregate;
use crate::engine::{self, RunReport, SimConfig, Variant};
use crate::error::ConfigError;
use crate::verify::{self, Verifier};

/// Exit status for bad arguments or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit status when a verification criterion fails.
pub const EXIT_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "popsim", version, about = "Seeded population-protocol simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single simulation and print its report.
    Run(RunArgs),
    /// Run independent trials over one or more population sizes.
    Sweep(SweepArgs),
    /// Run acceptance criteria and print one line per criterion.
    Verify(VerifyArgs),
    /// Measure simulator throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Simulation settings shared by `run`, `sweep` and `bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// fast, las_vegas, epidemic_only, junta_only, clock_only or slow_only.
    #[arg(long)]
    pub variant: Option<String>,
    /// Population size; `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub level_cap: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_interactions: Option<u64>,
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Zero-passes each agent must complete in `clock_only` runs.
    #[arg(long)]
    pub clock_passes: Option<u32>,
    /// Count distinct agent states (true or false).
    #[arg(long)]
    pub audit_states: Option<bool>,
    /// File of `key = value` settings, overridden by flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Print per-size quantiles instead of one row per trial.
    #[arg(long)]
    pub summary: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads; defaults to `POPSIM_THREADS` or the core count.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// `all`, a suite name, a criterion name, or comma-separated ids.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Interactions to simulate.
    #[arg(long, default_value_t = 10_000_000)]
    pub interactions: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

/// Settings after merging defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub template: SimConfig,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub format: Format,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

/// Parse a `key = value` settings file. Blank lines and `#` comments are
/// ignored; keys use the long flag names with `_` or `-`.
pub fn parse_config_text(text: &str, into: &mut Resolved) -> Result<(), CliError> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let t = &mut into.template;
        match key.as_str() {
            "variant" => t.variant = value.parse()?,
            "n" => {
                into.sizes = value
                    .split(',')
                    .map(|v| parse_value("n", v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "m" => t.m = parse_value(&key, value)?,
            "k" => t.k = parse_value(&key, value)?,
            "level_cap" => t.level_cap = Some(parse_value(&key, value)?),
            "seed" => t.seed = parse_value(&key, value)?,
            "max_interactions" => t.max_interactions = Some(parse_value(&key, value)?),
            "snapshot_every" => t.snapshot_every = Some(parse_value(&key, value)?),
            "clock_passes" => t.clock_passes = parse_value(&key, value)?,
            "audit_states" => t.audit_states = parse_value(&key, value)?,
            "trials" => into.trials = parse_value(&key, value)?,
            "format" => {
                into.format = Format::from_str(value, true)
                    .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `format`")))?
            }
            other => return Err(CliError::Usage(format!("line {}: unknown key `{other}`", lineno + 1))),
        }
    }
    Ok(())
}

/// Merge defaults, the optional config file and the flags.
pub fn resolve(sim: &SimArgs, trials: Option<usize>, format: Option<Format>) -> Result<Resolved, CliError> {
    let mut r = Resolved {
        template: SimConfig::new(Variant::Fast, 0, 0),
        sizes: Vec::new(),
        trials: 1,
        format: Format::Json,
    };
    if let Some(path) = &sim.config {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        parse_config_text(&text, &mut r)?;
    }
    let t = &mut r.template;
    if let Some(v) = &sim.variant {
        t.variant = v.parse()?;
    }
    if !sim.n.is_empty() {
        r.sizes = sim.n.clone();
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = sim.$field { t.$field = v; })* };
    }
    set!(m, k, seed, clock_passes, audit_states);
    if sim.level_cap.is_some() {
        t.level_cap = sim.level_cap;
    }
    if sim.max_interactions.is_some() {
        t.max_interactions = sim.max_interactions;
    }
    if sim.snapshot_every.is_some() {
        t.snapshot_every = sim.snapshot_every;
    }
    if let Some(tr) = trials {
        r.trials = tr;
    }
    if let Some(f) = format {
        r.format = f;
    }
    if r.sizes.is_empty() {
        return Err(CliError::Usage("missing population size: pass --n or set n in the config file".into()));
    }
    if r.trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    for &n in &r.sizes {
        SimConfig { n, ..r.template.clone() }.validate()?;
    }
    Ok(r)
}

fn emit(output: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn reports_text(reports: &[RunReport], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = RunReport::csv_header();
            s.push('\n');
            for r in reports {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            s
        }
        Format::Json if reports.len() == 1 => format!("{}\n", reports[0].to_json()),
        Format::Json => format!("{}\n", serde_json::to_string(reports).expect("reports serialize")),
    }
}

/// Configs for a sweep: trials `0..trials` of each size, seeded from the
/// template's seed with [`engine::trial_seed`].
pub fn sweep_configs(r: &Resolved) -> Vec<SimConfig> {
    r.sizes
        .iter()
        .flat_map(|&n| {
            let template = SimConfig { n, ..r.template.clone() };
            verify::block_configs(&template, r.template.seed, 0, r.trials)
        })
        .collect()
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = resolve(&args.sim, None, args.format)?;
    if r.sizes.len() != 1 {
        return Err(CliError::Usage("run takes a single --n; use sweep for several".into()));
    }
    let config = SimConfig { n: r.sizes[0], ..r.template.clone() };
    log::info(format!("run {} n={} seed={}", config.variant, config.n, config.seed));
    let report = engine::run(&config)?;
    if !report.stabilized {
        log::info(format!("interaction cap {} reached before stabilization", report.interactions_total));
    }
    emit(&args.output, &reports_text(&[report], r.format), out)?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut r = resolve(&args.sim, args.trials, args.format)?;
    if args.format.is_none() && args.sim.config.is_none() {
        r.format = Format::Csv;
    }
    let configs = sweep_configs(&r);
    let threads = args.threads.unwrap_or_else(verify::threads_from_env);
    log::info(format!("sweep {} over n={:?}, {} trials each, {threads} threads", r.template.variant, r.sizes, r.trials));
    let reports = verify::run_trials(&configs, threads);
    let text = if args.summary {
        let mut agg = TrialAggregate::new();
        for rep in &reports {
            agg.add_report(rep);
        }
        match r.format {
            Format::Csv => agg.to_csv(),
            Format::Json => format!("{}\n", agg.to_json()),
        }
    } else {
        reports_text(&reports, r.format)
    };
    emit(&args.output, &text, out)?;
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let ids = verify::suite_ids(&args.suite).ok_or_else(|| CliError::Usage(format!("unknown suite `{}`", args.suite)))?;
    let threads = args.threads.unwrap_or_else(verify::threads_from_env);
    let mut verifier = Verifier::new(threads).with_progress(true);
    let verdicts: Vec<_> = ids
        .iter()
        .map(|&id| {
            let v = verifier.run(id);
            log::info(v.line());
            v
        })
        .collect();
    let text = match args.format.unwrap_or(Format::Csv) {
        Format::Csv => verdicts.iter().map(|v| v.line() + "\n").collect::<String>(),
        Format::Json => format!("{}\n", serde_json::to_string(&verdicts).expect("verdicts serialize")),
    };
    emit(&args.output, &text, out)?;
    Ok(if verdicts.iter().all(|v| v.passed) { 0 } else { EXIT_FAILED })
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let r = resolve(&args.sim, None, None)?;
    for &n in &r.sizes {
        let config = SimConfig {
            n,
            max_interactions: Some(args.interactions),
            audit_states: false,
            ..r.template.clone()
        };
        config.validate()?;
        let start = Instant::now();
        let report = engine::run(&config)?;
        let secs = start.elapsed().as_secs_f64();
        let done = report.interactions_total.max(1);
        writeln!(
            out,
            "{} n={n}: {} interactions in {secs:.3}s, {:.1} ns/interaction",
            config.variant,
            report.interactions_total,
            secs * 1e9 / done as f64
        )
        .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
    }
    Ok(0)
}

/// Execute a parsed command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("popsim: {e}");
            e.exit_code()
        }
    }
}

mod log {
    pub fn info(msg: impl AsRef<str>) {
        eprintln!("popsim: {}", msg.as_ref());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_cli(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = main_with_args(std::iter::once("popsim").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn run_prints_json() {
        let (code, out) = run_cli(&["run", "--variant", "epidemic_only", "--n", "64", "--seed", "3"]);
        assert_eq!(code, 0);
        let r: RunReport = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(r.n, 64);
        assert!(r.stabilized);
    }

    #[test]
    fn tiny_population_is_usage_error() {
        assert_eq!(run_cli(&["run", "--n", "1"]).0, EXIT_USAGE);
        assert_eq!(run_cli(&["run"]).0, EXIT_USAGE);
        assert_eq!(run_cli(&["run", "--n", "8", "--variant", "nope"]).0, EXIT_USAGE);
        assert_eq!(run_cli(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_cli(&["verify", "--suite", "nothing"]).0, EXIT_USAGE);
    }

    #[test]
    fn sweep_csv_rows() {
        let (code, out) = run_cli(&["sweep", "--variant", "junta_only", "--n", "32,64", "--trials", "3", "--threads", "1"]);
        assert_eq!(code, 0);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], RunReport::csv_header());
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1..4].iter().all(|l| l.split(',').nth(1) == Some("32")));
    }

    #[test]
    fn sweep_is_deterministic_across_threads() {
        let a = run_cli(&["sweep", "--variant", "fast", "--n", "64", "--trials", "4", "--threads", "1", "--seed", "7"]);
        let b = run_cli(&["sweep", "--variant", "fast", "--n", "64", "--trials", "4", "--threads", "3", "--seed", "7"]);
        assert_eq!(a, b);
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.conf");
        fs::write(&path, "# settings\nvariant = slow_only\nn = 4\nseed = 5\nformat = csv\n").unwrap();
        let p = path.to_str().unwrap();
        let (code, out) = run_cli(&["run", "--config", p]);
        assert_eq!(code, 0);
        assert!(out.starts_with("seed,"));
        assert!(out.lines().nth(1).unwrap().starts_with("5,4,"));
        let (_, out) = run_cli(&["run", "--config", p, "--seed", "6", "--format", "json"]);
        let r: RunReport = serde_json::from_str(out.trim()).unwrap();
        assert_eq!((r.seed, r.variant), (6, Variant::SlowOnly));
    }

    #[test]
    fn bad_config_lines() {
        let mut r = Resolved { template: SimConfig::new(Variant::Fast, 8, 0), sizes: vec![8], trials: 1, format: Format::Csv };
        assert!(parse_config_text("m 16", &mut r).is_err());
        assert!(parse_config_text("colour = red", &mut r).is_err());
        assert!(parse_config_text("m = sixteen", &mut r).is_err());
        parse_config_text("level-cap = 9\naudit_states = false", &mut r).unwrap();
        assert_eq!(r.template.level_cap, Some(9));
        assert!(!r.template.audit_states);
    }

    #[test]
    fn output_file_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let (code, out) = run_cli(&["run", "--variant", "slow_only", "--n", "4", "--format", "csv", "--output", path.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(out.is_empty());
        assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 2);
    }

    #[test]
    fn verify_oracle_suite_passes() {
        let (code, out) = run_cli(&["verify", "--suite", "9", "--threads", "2"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.starts_with("PASS [ 9]"));
    }

    #[test]
    fn bench_reports_rate() {
        let (code, out) = run_cli(&["bench", "--variant", "clock_only", "--n", "256", "--interactions", "10000"]);
        assert_eq!(code, 0);
        assert!(out.contains("ns/interaction"));
    }
}
