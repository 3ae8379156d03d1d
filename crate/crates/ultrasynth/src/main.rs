use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ultrasynth::pipeline::run_command;
use ultrasynth::PipelineConfig;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Generate,
    FitNoise,
    Synth,
    Hpo,
    TrainEval,
    Explain,
    Golden,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::FitNoise => "fit-noise",
            Command::Synth => "synth",
            Command::Hpo => "hpo",
            Command::TrainEval => "train-eval",
            Command::Explain => "explain",
            Command::Golden => "golden",
        }
    }
}

/// Synthetic ultrasonic C-scan datasets: phantom generation, noise
/// modelling, CNN training and evaluation.
#[derive(Debug, Parser)]
#[command(name = "ultrasynth", version)]
struct Cli {
    command: Command,
    /// Pipeline config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config key, e.g. `--set cnn.epochs=60`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = PipelineConfig::load(&cli.config, &cli.overrides)
        .and_then(|cfg| run_command(cli.command.name(), &cfg));
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
