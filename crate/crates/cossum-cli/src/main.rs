//! `cossum`: sample, recover, and benchmark sparse cosine sums.

mod commands;
mod io;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cossum",
    version,
    about = "Recover sparse cosine sums from equidistant samples"
)]
struct Cli {
    /// TOML config supplying defaults for omitted flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a cosine sum onto the half-shifted grid and write a CSV.
    Generate(commands::GenerateArgs),
    /// Recover frequencies and coefficients from a sample CSV.
    Recover(commands::RecoverArgs),
    /// Benchmark methods across seeded noise realizations.
    NoiseBench(commands::NoiseBenchArgs),
    /// Approximate the scaled Bessel function (B/t) J_n(t) by a cosine sum.
    Bessel(commands::BesselArgs),
    /// Dump the DCT-II spectrum and transformed interpolation data.
    Dct(commands::DctArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match io::load_config(cli.config.as_deref()) {
        Ok(config) => config,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Generate(args) => commands::cmd_generate(args, &config),
        Command::Recover(args) => commands::cmd_recover(args, &config),
        Command::NoiseBench(args) => commands::cmd_noise_bench(args, &config),
        Command::Bessel(args) => commands::cmd_bessel(args, &config),
        Command::Dct(args) => commands::cmd_dct(args, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: io::CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.code())
}
