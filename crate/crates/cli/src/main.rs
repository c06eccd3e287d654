mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, Format, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "pfaff", version, about = "Integrability, integrating factors and reachability for Pfaffian forms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Classification tolerance on normalized defects and tensor entries.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Sample points (classification and invariance checks).
    #[arg(long, global = true, default_value_t = 64)]
    samples: usize,
    /// ODE relative tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    rtol: f64,
    /// ODE absolute tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    atol: f64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify a form as exact, locally integrable or non-integrable.
    Check(commands::CheckArgs),
    /// Potential and factor of a two-variable form from its characteristics.
    Factor2(commands::Factor2Args),
    /// Potential and factor of an integrable form from its leaves.
    FactorGlobal(commands::GlobalArgs),
    /// Explore the null-curve reachable set around a point.
    Reach(commands::ReachArgs),
    /// CSV polylines on level sets.
    Foliate(commands::FoliateArgs),
    /// Compare tensor nullity before and after a change of variables.
    Invariance(commands::InvarianceArgs),
    /// List, dump or self-check the built-in forms.
    Catalog(commands::CatalogArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = config::threads_from_env()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot start {threads} threads: {e}")))?;
    let Common {
        tol,
        samples,
        rtol,
        atol,
        out,
        format,
    } = cli.common;
    let mut cfg = RunConfig {
        tol,
        samples,
        seed: 42,
        rtol,
        atol,
        out,
        csv: None,
        format,
    };
    cfg.validate()?;
    match cli.command {
        Command::Check(a) => commands::check(&cfg, a),
        Command::Factor2(a) => commands::factor2(&mut cfg, a),
        Command::FactorGlobal(a) => commands::factor_global(&mut cfg, a),
        Command::Reach(a) => commands::reach(&mut cfg, a),
        Command::Foliate(a) => commands::foliate(&cfg, a),
        Command::Invariance(a) => commands::invariance(&cfg, a),
        Command::Catalog(a) => commands::catalog(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version go to stdout with status 0, usage errors exit 2
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
