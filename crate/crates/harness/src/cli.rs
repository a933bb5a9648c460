//! `uepmm` command line. Flags override the matching config fields.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uepmm_core::decoding::DecodeMode;
use uepmm_core::latency::LatencyFamily;
use uepmm_core::Rational;

use crate::config::{ExperimentConfig, Format};
use crate::experiment::{partition_label, run_analytic, run_decode_probs, run_monte_carlo};
use crate::output::{curve_records, decode_prob_records, emit, Record};
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "uepmm", version, about = "UEP-coded approximate matrix multiplication experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form results.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Monte-Carlo loss curve.
    Simulate(Overrides),
    /// Repeat a run over several values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum Analyze {
    /// Per-class decoding probability against the number of received packets.
    DecodeProb(Overrides),
    /// Expected normalized loss over the time grid.
    Loss(Overrides),
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Exponential latency rate λ.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Load scaling Ω, as `p/q` or an integer.
    #[arg(long)]
    pub omega: Option<Rational>,
    /// Comma-separated time grid.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub decode_mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    RankOracle,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Rate,
    Workers,
    Omega,
    Trials,
    Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SweepMode {
    #[default]
    Analytic,
    Simulate,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: Param,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    pub mode: SweepMode,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::Rate => "rate",
            Param::Workers => "workers",
            Param::Omega => "omega",
            Param::Trials => "trials",
            Param::Seed => "seed",
        }
    }
}

fn parse<T: std::str::FromStr>(param: Param, v: &str) -> Result<T, HarnessError> {
    v.trim().parse().map_err(|_| HarnessError::Config(format!("invalid value {v:?} for {}", param.name())))
}

fn set_rate(cfg: &mut ExperimentConfig, rate: f64) -> Result<(), HarnessError> {
    match &mut cfg.latency.family {
        LatencyFamily::Exponential { rate: r } => {
            *r = rate;
            Ok(())
        }
        LatencyFamily::Deterministic { .. } => {
            Err(HarnessError::Config("--rate needs exponential latency".into()))
        }
    }
}

fn apply_param(cfg: &mut ExperimentConfig, param: Param, v: &str) -> Result<(), HarnessError> {
    match param {
        Param::Rate => set_rate(cfg, parse(param, v)?)?,
        Param::Workers => cfg.code.workers = parse(param, v)?,
        Param::Omega => cfg.latency.omega = parse(param, v)?,
        Param::Trials => cfg.trials = parse(param, v)?,
        Param::Seed => cfg.seed = parse(param, v)?,
    }
    Ok(())
}

impl Overrides {
    /// Load the config and apply every flag that was given.
    pub fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        if let Some(v) = self.rate {
            set_rate(&mut cfg, v)?;
        }
        if let Some(v) = self.workers {
            cfg.code.workers = v;
        }
        if let Some(v) = self.omega {
            cfg.latency.omega = v;
        }
        if let Some(v) = &self.times {
            cfg.times = Some(v.clone());
        }
        if let Some(m) = self.decode_mode {
            cfg.decode_mode = match m {
                Mode::RankOracle => DecodeMode::RankOracle,
                Mode::Numeric => DecodeMode::Numeric,
            };
        }
        Ok(cfg)
    }
}

fn analytic_records(cfg: &ExperimentConfig, scheme: &str) -> Result<Vec<Record>, HarnessError> {
    let a = run_analytic(cfg)?;
    Ok(curve_records(&a.curve, scheme, partition_label(&cfg.partition), a.bound.as_deref()))
}

/// Simulated curve; c×r runs also carry the analytic bound when defined.
fn simulated_records(cfg: &ExperimentConfig, scheme: &str) -> Result<Vec<Record>, HarnessError> {
    let mc = run_monte_carlo(cfg)?;
    let bound = run_analytic(cfg)?.bound;
    Ok(curve_records(&mc.curve, scheme, partition_label(&cfg.partition), bound.as_deref()))
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let (cfg, records) = match cli.command {
        Command::Analyze(Analyze::DecodeProb(o)) => {
            let cfg = o.load()?;
            let probs = run_decode_probs(&cfg)?;
            let recs = decode_prob_records(&probs, &cfg.code.family.label(), partition_label(&cfg.partition));
            (cfg, recs)
        }
        Command::Analyze(Analyze::Loss(o)) => {
            let cfg = o.load()?;
            let recs = analytic_records(&cfg, &cfg.code.family.label())?;
            (cfg, recs)
        }
        Command::Simulate(o) => {
            let cfg = o.load()?;
            let recs = simulated_records(&cfg, &cfg.code.family.label())?;
            (cfg, recs)
        }
        Command::Sweep(s) => {
            let base = s.overrides.load()?;
            let mut recs = Vec::new();
            for v in &s.values {
                let mut cfg = base.clone();
                apply_param(&mut cfg, s.param, v)?;
                let scheme = format!("{}@{}={}", cfg.code.family.label(), s.param.name(), v.trim());
                recs.extend(match s.mode {
                    SweepMode::Analytic => analytic_records(&cfg, &scheme)?,
                    SweepMode::Simulate => simulated_records(&cfg, &scheme)?,
                });
            }
            (base, recs)
        }
    };
    emit(&records, cfg.format, cfg.output.as_deref(), stdout)
}

/// Parse `args`, run, and return the process exit code: 0 on success, 2 on
/// usage or config errors, 1 on runtime errors.
pub fn run<I, S>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("uepmm: {e}");
            e.exit_code()
        }
    }
}
