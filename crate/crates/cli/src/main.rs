//! `gcp`: analytic solvers, Monte Carlo estimators and simulators for Gaussian consensus
//! processes.
//!
//! Exit status: 0 success, 1 validation failure, 2 usage error, 3 numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcp_core::harness::{self, Command, RawConfig};

#[derive(Parser, Debug)]
#[command(name = "gcp", version, about = "Gaussian consensus process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Top exponent, regime and critical values from closed forms.
    Analytic,
    /// Exponent and regime over an (alpha, beta) grid, plus the critical curve.
    PhaseDiagram,
    /// Monte Carlo estimate of the full exponent spectrum.
    McSpectrum,
    /// Discrete-time opinion trajectory.
    SimulateA,
    /// Continuous-time covariance trajectory.
    SimulateB,
    /// Alignment of topics along the dominant direction.
    Align,
    /// Cross-module invariant suite.
    Validate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Analytic => Command::Analytic,
            Sub::PhaseDiagram => Command::PhaseDiagram,
            Sub::McSpectrum => Command::McSpectrum,
            Sub::SimulateA => Command::SimulateA,
            Sub::SimulateB => Command::SimulateB,
            Sub::Align => Command::Align,
            Sub::Validate => Command::Validate,
        }
    }
}

/// Values are kept as text so the harness reports bad ones by key.
#[derive(Args, Debug)]
struct Flags {
    /// Population size.
    #[arg(long = "N", global = true)]
    n: Option<String>,
    /// Number of topics.
    #[arg(long, global = true)]
    d: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<String>,
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    gamma: Option<String>,
    #[arg(long, global = true)]
    dt: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<String>,
    #[arg(long, global = true)]
    replicas: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Record every this many steps.
    #[arg(long, global = true)]
    stride: Option<String>,
    /// `exact` or `em` (simulate-b).
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// `quick` or `full` (validate).
    #[arg(long, global = true)]
    level: Option<String>,
    #[arg(long = "alpha-min", global = true)]
    alpha_min: Option<String>,
    #[arg(long = "alpha-max", global = true)]
    alpha_max: Option<String>,
    #[arg(long = "alpha-count", global = true)]
    alpha_count: Option<String>,
    #[arg(long = "beta-count", global = true)]
    beta_count: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<String>,
    /// `csv` or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// JSON config document; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

impl Flags {
    fn raw(&self) -> RawConfig {
        let pairs = [
            ("N", &self.n),
            ("d", &self.d),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("dt", &self.dt),
            ("steps", &self.steps),
            ("t_end", &self.t_end),
            ("replicas", &self.replicas),
            ("seed", &self.seed),
            ("tol", &self.tol),
            ("stride", &self.stride),
            ("scheme", &self.scheme),
            ("level", &self.level),
            ("alpha_min", &self.alpha_min),
            ("alpha_max", &self.alpha_max),
            ("alpha_count", &self.alpha_count),
            ("beta_count", &self.beta_count),
            ("out", &self.out),
            ("format", &self.format),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = harness::parse_config(cli.command.map(Into::into), &cli.flags.raw(), cli.flags.config.as_deref())
        .and_then(|config| {
            let outcome = harness::run(&config)?;
            harness::emit(&outcome.output, config.format, config.out.as_deref())?;
            Ok(outcome.failed)
        });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("gcp: validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("gcp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
