//! `bvflow`: batch driver for vanishing-viscosity gradient-flow experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure (a
//! `diagnostic.txt` naming the violated invariant is written alongside the
//! partial outputs, and the MANIFEST lists whatever was completed).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CmdError;
use output::OutputSink;

#[derive(Parser)]
#[command(
    name = "bvflow",
    about = "Vanishing-viscosity limits of nonconvex gradient flows",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration
    config: PathBuf,
    /// key=value overrides applied to the configuration tree
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides [output].dir)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cross-check analytic derivatives against finite differences
    Validate(RunArgs),
    /// Integrate the viscous flow for each epsilon and dump trajectories
    Simulate(RunArgs),
    /// Catalog critical points, continue branches, report fold diagnostics
    Branches(RunArgs),
    /// Solve one frozen-time heteroclinic jump
    Jump(RunArgs),
    /// All-pairs dissipation costs and metric property checks
    Cost(RunArgs),
    /// Construct the limiting branch-and-jump evolution
    Limit(RunArgs),
    /// Limit construction plus the epsilon-ladder convergence study
    Compare(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let (args, runner): (&RunArgs, fn(&config::RunConfig, &mut OutputSink) -> commands::CmdResult) =
        match &cli.cmd {
            Cmd::Validate(a) => (a, commands::run_validate),
            Cmd::Simulate(a) => (a, commands::run_simulate),
            Cmd::Branches(a) => (a, commands::run_branches),
            Cmd::Jump(a) => (a, commands::run_jump),
            Cmd::Cost(a) => (a, commands::run_cost),
            Cmd::Limit(a) => (a, commands::run_limit),
            Cmd::Compare(a) => (a, commands::run_compare),
        };

    let cfg = match config::load_config(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut sink = match OutputSink::create(&out_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(1);
        }
    };

    let outcome = runner(&cfg, &mut sink);
    let code = match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(CmdError::Numeric(e)) => {
            eprintln!("numerical failure: {e:#}");
            let _ = sink.write("diagnostic.txt", &format!("{e:#}\n"));
            ExitCode::from(2)
        }
    };
    if let Err(e) = sink.finish() {
        eprintln!("cannot finalize MANIFEST: {e:#}");
        return ExitCode::from(1);
    }
    code
}
