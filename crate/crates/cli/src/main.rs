use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Quantized feedback of nonlinear systems with input delay.
#[derive(Parser)]
#[command(name = "qdelay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the design constants and quantizer parameters.
    Design(Io),
    /// Simulate every initial function and check the design bounds.
    Simulate(Io),
    /// Tabulate the delay bounds over a grid of delta.
    Sweep(Io),
    /// Run the property suites and both example scenarios.
    Verify(Io),
}

type Handler = fn(&config::Loaded, &std::path::Path) -> anyhow::Result<bool>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (io, run): (&Io, Handler) = match &cli.command {
        Command::Design(io) => (io, commands::cmd_design),
        Command::Simulate(io) => (io, commands::cmd_simulate),
        Command::Sweep(io) => (io, commands::cmd_sweep),
        Command::Verify(io) => (io, commands::cmd_verify),
    };
    let result = config::load(&io.config).and_then(|loaded| run(&loaded, &io.out));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
