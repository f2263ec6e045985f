use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tubechan::scenario::commands::{self, Invocation};
use tubechan::Error;

/// Non-stationary mmWave channel simulator for vacuum-tube train links.
/// Writes plot-ready CSV files; progress goes to standard error.
#[derive(Debug, Parser)]
#[command(name = "tubechan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve realizations over the run horizon; write clusters.csv and
    /// snapshot JSON at the requested instants.
    Run(Common),
    /// Correlation functions, PDP and stationary-interval CCDF at each
    /// instant.
    Stats(Common),
    /// Run tube, tunnel and open-hst-approx under one seed and join their
    /// cluster-count and stationary-interval tables.
    Compare(Common),
    /// Repeat `stats` and `run` for each value of one key.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Scenario preset: tube, tunnel or open-hst-approx.
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key after the preset and file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of realizations (overrides run.realizations).
    #[arg(long)]
    realizations: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR", env = "TUBECHAN_OUT", default_value = "tubechan-out")]
    out: PathBuf,
    /// Comma-separated anchor instants in seconds (overrides run.instants_s).
    #[arg(long, value_name = "T1,T2,...")]
    instants: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Key to vary, e.g. v_kmh.
    #[arg(long)]
    key: String,
    /// Comma-separated values of the key.
    #[arg(long, value_name = "V1,V2,...")]
    values: String,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl Common {
    fn invocation(&self) -> Result<Invocation, Failure> {
        let config_text = match &self.config {
            Some(path) => Some(
                fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
            ),
            None => None,
        };
        Ok(Invocation {
            preset: self.preset.clone(),
            config_text,
            overrides: self.overrides.clone(),
            seed: self.seed,
            realizations: self.realizations,
            instants: self.instants.clone(),
            out: self.out.clone(),
        })
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Runtime(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Run(c) | Command::Stats(c) | Command::Compare(c) => c,
        Command::Sweep(s) => &s.common,
    };
    let pool = pool(common.jobs)?;
    let inv = common.invocation()?;
    pool.install(|| match &cli.command {
        Command::Run(_) => commands::run(&inv.load()?, &inv.out),
        Command::Stats(_) => commands::stats(&inv.load()?, &inv.out).map(|_| ()),
        Command::Compare(_) => commands::compare(&inv),
        Command::Sweep(s) => {
            let values: Vec<String> = s
                .values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect();
            commands::sweep(&inv, &s.key, &values)
        }
    })
    .map_err(Failure::from)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
