mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Simulation and exact-computation front end for the solid-on-solid interface model.
#[derive(Parser, Debug)]
#[command(name = "sos", version, args_override_self = true)]
pub struct Cli {
    /// Cap on worker threads (default: all cores). Does not change results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file. Relative paths resolve against $SOS_OUTPUT_DIR when set;
    /// without this flag output goes to $SOS_OUTPUT_DIR/<command>.csv or stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Model {
    /// Lattice length; a comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Height cap (default: n).
    #[arg(long, conflicts_with = "unbounded")]
    pub cap: Option<u32>,
    /// Heights in all of N instead of [0, cap].
    #[arg(long)]
    pub unbounded: bool,
    /// Left boundary height.
    #[arg(long, default_value_t = 0)]
    pub left: u32,
    /// Right boundary height.
    #[arg(long, default_value_t = 0)]
    pub right: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one chain and record statistics along the trajectory.
    Simulate {
        #[command(flatten)]
        model: Model,
        /// single-site, column, parallel-oe, parallel-eo, or pinned<m>-<base>.
        #[arg(long, default_value = "column")]
        kind: String,
        #[arg(long)]
        steps: u64,
        /// top, bottom, equilibrium, at-least:<h>, pinned:<m> or fixed:<h1,h2,...>.
        #[arg(long, default_value = "top")]
        start: String,
        /// Comma-separated: mean-height, max-height, max-gradient, distance.
        #[arg(long, value_delimiter = ',', default_value = "mean-height")]
        statistic: Vec<String>,
        /// Record every this many steps (default n^2).
        #[arg(long)]
        stride: Option<u64>,
    },
    /// Coalescence times of coupled runs from the bottom and top contours.
    Coalesce {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "column")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        replicas: usize,
        /// Step budget per replica (default 64 n^3 ln n, times sqrt n for single-site).
        #[arg(long)]
        t_max: Option<u64>,
    },
    /// Coalescence medians over a list of sizes with a log-log fit.
    Sweep {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "column")]
        kind: String,
        #[arg(long, default_value_t = 32)]
        replicas: usize,
        #[arg(long)]
        t_max: Option<u64>,
    },
    /// Checks the exact one-step contraction of the weighted distance on random ordered pairs.
    DriftCheck {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
    /// Exact enumeration of a small chain.
    Exact {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "column")]
        kind: String,
        /// stationary, tv, gap or check.
        #[arg(long, default_value = "stationary")]
        report: String,
        /// Horizon of the tv report.
        #[arg(long, default_value_t = 1000)]
        t_max: usize,
    },
    /// Exact event probabilities or exact samples from the transfer matrix.
    Equilibrium {
        #[command(flatten)]
        model: Model,
        /// Comma-separated events: A:<h>, B:<d>, exceed:<level>, marginal:<i>:<h>
        /// (1-based i). Default: every A_h and B_d.
        #[arg(long, value_delimiter = ',')]
        event: Vec<String>,
        /// Emit this many exact samples instead of probabilities.
        #[arg(long)]
        samples: Option<usize>,
        /// Conditioning of the samples: none, at-least:<h> or pinned:<m>.
        #[arg(long, default_value = "none")]
        condition: String,
    },
    /// Band-hitting times from a chosen start, fitted over sizes.
    Relax {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "single-site")]
        kind: String,
        /// top, bottom, at-least:<h>, at-least:sqrt or pinned:<m>.
        #[arg(long, default_value = "bottom")]
        start: String,
        /// mean-height or max-height.
        #[arg(long, default_value = "mean-height")]
        statistic: String,
        #[arg(long, default_value_t = 32)]
        replicas: usize,
        /// Run the pinned doubling schedule (one size) instead of a sweep.
        #[arg(long)]
        doubling: bool,
        /// Step budget per stage of the doubling schedule.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Staged descent of the maximum height from the top contour.
    Descent {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value = "single-site")]
        kind: String,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Mixing of one column between boundary heights a and b, started at b + ell.
    ColumnWalk {
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "10")]
        a: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "12")]
        b: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        ell: Vec<u32>,
        #[arg(long, default_value_t = 4096)]
        replicas: usize,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u64,
    },
}

/// Successful run; `timed_out` marks a timeout-dominated result.
pub struct Report {
    pub csv: String,
    pub timed_out: bool,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Io(String),
}

impl From<sos_core::SosError> for Failure {
    fn from(e: sos_core::SosError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn run(args: Vec<OsString>) -> Result<ExitCode, Failure> {
    let args = config::expand(args).map_err(Failure::Config)?;
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(ExitCode::from(code));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::Config(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let header = commands::config_row(name, sub);
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let report = commands::dispatch(&cli.command)?;
    commands::write_output(name, cli.output.as_deref(), &header, &report.csv)?;
    Ok(ExitCode::from(if report.timed_out { 3 } else { 0 }))
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
