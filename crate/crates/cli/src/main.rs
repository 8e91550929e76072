//! `lqgame`: solve, simulate and sweep observation/jamming games from TOML
//! configuration files. Every command writes plain CSV (plus JSON for the
//! strategy) into an output directory.

mod output;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lqgame::control::{backward_riccati, RiccatiSolution};
use lqgame::decision::{self, Method, Plan, DEFAULT_NODE_LIMIT};
use lqgame::simulation::{monte_carlo, rollout};
use lqgame::{model, ControlError, GameSpec, SolveError};

#[derive(Parser)]
#[command(name = "lqgame", version, about = "Zero-sum LQG games with controlled observation and jamming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game and write its strategy, value and on-path decisions.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Solve, then estimate the value by Monte Carlo.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the rollout of `--seed` as trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Solve once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: sweep::Param,
        /// Comma-separated values, e.g. `0.9,1.5,8`.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Largest covariance tree the enumerating solver may build.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    node_limit: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Enumerate,
    Policy,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Enumerate => Method::Enumerate,
            MethodArg::Policy => Method::Policy,
        }
    }
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<ControlError> for Failure {
    fn from(e: ControlError) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::NoPureNash { .. } => 3,
            SolveError::Control(_) | SolveError::Estimation(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

fn load(path: &Path) -> Result<GameSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    model::parse_spec(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn solve(spec: &GameSpec, common: &Common) -> Result<(RiccatiSolution, Plan), Failure> {
    let riccati = backward_riccati(spec)?;
    let plan = decision::solve(spec, &riccati, common.method.into(), common.node_limit)?;
    Ok((riccati, plan))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { common } => {
            let spec = load(&common.config)?;
            let (riccati, plan) = solve(&spec, &common)?;
            fs::create_dir_all(&common.out)?;
            let value = output::write_solution(&common.out, &spec, &riccati, &plan)?;
            let path = plan.path(spec.observation_rule);
            println!(
                "value {} | observations {} | jammings {}{}",
                value.total,
                path.iter().filter(|s| s.decision.observe).count(),
                path.iter().filter(|s| s.decision.jam).count(),
                if plan.converged() { "" } else { " | policy iteration did not converge" }
            );
            Ok(())
        }
        Command::Simulate { common, replicates, seed, trace } => {
            if replicates < 2 {
                return Err(Failure::usage("--replicates must be at least 2"));
            }
            let spec = load(&common.config)?;
            let (riccati, plan) = solve(&spec, &common)?;
            fs::create_dir_all(&common.out)?;
            let value = output::write_solution(&common.out, &spec, &riccati, &plan)?;
            let stats = monte_carlo(&spec, &riccati, &plan, replicates, seed)?;
            output::write_stats(&common.out, &spec, &plan, &stats, value.total)?;
            if trace {
                output::write_trace(&common.out, &rollout(&spec, &riccati, &plan, seed)?)?;
            }
            println!(
                "analytic {} | monte carlo {} ± {} ({} replicates)",
                value.total, stats.mean, stats.std_error, stats.replicates
            );
            Ok(())
        }
        Command::Sweep { common, param, values } => {
            if values.is_empty() {
                return Err(Failure::usage("--values must list at least one value"));
            }
            let spec = load(&common.config)?;
            let rows = sweep::run(&spec, param, &values, common.method.into(), common.node_limit)?;
            fs::create_dir_all(&common.out)?;
            sweep::write(&common.out, param, &rows)?;
            for row in &rows {
                println!("{} = {}: {}", param.name(), row.value, row.status());
            }
            Ok(())
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
