//! `kernelbound`: hypothesis checks, Lyapunov synthesis, kernel solves and
//! verification driven by one config file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use error::{CliResult, EXIT_MATH, EXIT_PASS};
use output::Reporter;

#[derive(Debug, Parser)]
#[command(name = "kernelbound", version, about = "Kernel bounds for weakly coupled parabolic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// Run configuration file
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides KERNELBOUND_OUT and output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides run.jobs)
    #[arg(long, short)]
    jobs: Option<usize>,
    /// Seed for the randomized checks (overrides verify.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress messages on stderr
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the structural hypotheses on the coefficient family
    Check(Common),
    /// Synthesize and certify Lyapunov functions and the bound certificate
    Synth(Common),
    /// Compute kernel columns and write the kernel store
    Solve(Common),
    /// Run the property checks
    Verify(Common),
    /// check, synth, solve and verify in sequence
    All(Common),
}

fn run(cli: Cli) -> CliResult<bool> {
    let (which, common) = match cli.command {
        Command::Check(c) => ("check", c),
        Command::Synth(c) => ("synth", c),
        Command::Solve(c) => ("solve", c),
        Command::Verify(c) => ("verify", c),
        Command::All(c) => ("all", c),
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = Reporter::new(common.out.as_deref(), &cfg.output, common.quiet)?;
    let mut ctx = Ctx { cfg: &cfg, out, seed: common.seed.or(cfg.verify.as_ref().and_then(|v| v.seed)) };
    let jobs = common.jobs.or(cfg.jobs);
    let outcome = kernelbound::par::with_threads(jobs, || -> CliResult<bool> {
        Ok(match which {
            "check" => commands::check::run(&mut ctx)?,
            "synth" => commands::synth::run(&mut ctx)?,
            "solve" => commands::solve::run(&mut ctx)?,
            "verify" => commands::verify::run(&mut ctx)?,
            _ => {
                let mut pass = commands::check::run(&mut ctx)?;
                pass &= commands::synth::run(&mut ctx)?;
                pass &= commands::solve::run(&mut ctx)?;
                pass &= commands::verify::run(&mut ctx)?;
                pass
            }
        })
    });
    let pass = outcome?;
    ctx.out.progress(&format!("{} files written to {}", ctx.out.written().len(), ctx.out.dir().display()));
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_MATH,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
