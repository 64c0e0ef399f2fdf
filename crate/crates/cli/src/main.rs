use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pspd::Ablation;
use pspd_cli::run::{format_ablation, format_summary};
use pspd_cli::{emit_curves, generate_to_csv, load_config, run_ablation, run_experiment, CliResult, Overrides, RunOptions};

#[derive(Parser)]
#[command(name = "pspd", version, about = "Progressive self-paced distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured arm on every fold and report mean ± std.
    Run(RunArgs),
    /// Run Baseline, PclOnly, PcdOnly and Full on shared folds.
    Ablate(RunArgs),
    /// Merge trace files into a long-format curve CSV.
    Curves {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a synthetic dataset described by a TOML spec.
    GenData {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    ablation: Option<Ablation>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Replaces `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epochs: self.epochs,
            ablation: self.ablation,
            gamma: self.gamma,
            output_dir: self.output_dir.clone(),
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let loaded = load_config(&args.config, &args.overrides())?;
            let outcome = run_experiment(&loaded, RunOptions { threads: args.threads })?;
            println!("config {}  -> {}", loaded.hash, outcome.output_dir.display());
            print!("{}", format_summary(&outcome.summary));
        }
        Command::Ablate(args) => {
            let loaded = load_config(&args.config, &args.overrides())?;
            let outcome = run_ablation(&loaded, RunOptions { threads: args.threads })?;
            println!("config {}  -> {}", loaded.hash, outcome.output_dir.display());
            print!("{}", format_ablation(&outcome));
        }
        Command::Curves { traces, output } => emit_curves(&traces, &output)?,
        Command::GenData { spec, output } => {
            let data = generate_to_csv(&spec, &output)?;
            println!("wrote {} samples to {}", data.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
