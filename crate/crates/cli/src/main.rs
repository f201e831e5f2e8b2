// SPDX-License-Identifier: MIT OR Apache-2.0

//! `patchlab` command-line runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchlab::scenarios::{run_scenario, Clock, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "patchlab", version, about = "Seeded subspace-patching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Patch the three-unit identity network along named directions.
    Toy(RunArgs),
    /// Train DAS on the synthetic pathway model and decompose the result.
    IllusionSynth(RunArgs),
    /// Rank-1 edit optimality, patch/edit equivalence and recovery suites.
    RomeRoundtrip(RunArgs),
    /// Probes, distortion regressions and the separability construction.
    Separability(RunArgs),
    /// Print the complete default configuration of a scenario.
    Defaults {
        scenario: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; scenario defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;

fn load(scenario: Scenario, args: &RunArgs) -> patchlab::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::defaults(scenario),
    };
    if cfg.scenario != scenario {
        return Err(patchlab::Error::Config(format!(
            "config is for scenario {}, but {} was requested",
            cfg.scenario, scenario
        )));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("out/{scenario}")));
    Ok((cfg, out))
}

fn run(scenario: Scenario, args: &RunArgs) -> ExitCode {
    let (cfg, out) = match load(scenario, args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_scenario(&cfg, &out, Clock::System) {
        Ok(record) => {
            print!("{}", record.summary);
            println!("outputs written to {}", record.out_dir.display());
            ExitCode::from(record.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Toy(a) => run(Scenario::Toy, &a),
        Command::IllusionSynth(a) => run(Scenario::IllusionSynth, &a),
        Command::RomeRoundtrip(a) => run(Scenario::RomeRoundtrip, &a),
        Command::Separability(a) => run(Scenario::Separability, &a),
        Command::Defaults { scenario } => match scenario.parse::<Scenario>() {
            Ok(s) => {
                println!("{}", ExperimentConfig::defaults(s).to_json_pretty());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
