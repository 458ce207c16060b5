use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use plap_cli::commands::{cmd_check, cmd_residuals, cmd_solve, cmd_sweep, cmd_verify_limit};
use plap_cli::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "plap",
    version,
    about = "First eigenpairs of coupled local/nonlocal p-Laplacians"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Fixed reduction order, bit-identical across thread counts.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Worker threads; 0 picks the number of cores. Overrides `solver.threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve for one eigenpair at `params.p`.
    Solve,
    /// Solve at every exponent of `sweep.p_values`.
    Sweep,
    /// Compare the last sweep row against the limit eigenvalue.
    VerifyLimit,
    /// Residuals of the limit system for a candidate pair.
    Residuals,
    /// Run the inequality suites.
    Check,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if matches!(cli.command, Command::Check) => RunConfig::empty(),
        None => {
            return Err(CliError::Config(
                "--config is required for this subcommand".into(),
            ))
        }
    };
    let threads = cli.threads.unwrap_or(cfg.solver.threads);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    plap_core::parallel::set_deterministic(cli.deterministic || cfg.solver.deterministic);
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Solve => cmd_solve(&cfg, &out, &mut stdout),
        Command::Sweep => cmd_sweep(&cfg, &out, &mut stdout),
        Command::VerifyLimit => cmd_verify_limit(&cfg, &out, &mut stdout),
        Command::Residuals => cmd_residuals(&cfg, &out, &mut stdout),
        Command::Check => cmd_check(&cfg, &out, &mut stdout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
