use std::path::PathBuf;
use std::process::ExitCode;

use beam_core::experiment::{self, EvalOptions, ExperimentError, RunOptions};
use clap::{Args, Parser, Subcommand};

/// Train and evaluate Boltzmann encoded adversarial machines.
#[derive(Parser)]
#[command(name = "beam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Master seed, replacing the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, replacing the config's `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Epoch budget: `N` for single-phase configs, `M+A` otherwise.
    #[arg(long)]
    epochs_override: Option<String>,
    /// Base for relative output directories.
    #[arg(long, env = "BEAM_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
}

impl Overrides {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            epochs_override: self.epochs_override.clone(),
            output_root: self.output_root.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train from scratch.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config and its data source without training.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Continue training from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sample a frozen model and compare it with a dataset
    /// (`mog_bimodal`, `mog_ring`, `mog_grid`, a .cfg file or an IDX file).
    Eval {
        checkpoint: PathBuf,
        dataset: String,
        #[arg(long, default_value_t = 1000)]
        particles: usize,
        #[arg(long, default_value_t = 100)]
        sweeps: usize,
        /// Mixture draws, or maximum IDX rows.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write eval.json and samples_eval.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn report_run(s: &experiment::RunSummary) {
    println!("finished {} epochs in {}", s.epochs, s.out_dir.display());
    if let Some(r) = &s.last {
        println!(
            "epoch {} ({}): forward_kl {:.6} reverse_kl {:.6}",
            r.epoch,
            r.phase.name(),
            r.divergence.forward_kl,
            r.divergence.reverse_kl
        );
    }
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, overrides } => report_run(&experiment::run(&config, &overrides.options())?),
        Command::Validate { config, overrides } => {
            let r = experiment::validate(&config, &overrides.options())?;
            println!("{}: ok", config.display());
            println!("{}", serde_json_pretty(&r));
        }
        Command::Resume {
            checkpoint,
            config,
            overrides,
        } => report_run(&experiment::resume(&checkpoint, &config, &overrides.options())?),
        Command::Eval {
            checkpoint,
            dataset,
            particles,
            sweeps,
            samples,
            seed,
            out_dir,
        } => {
            let opts = EvalOptions {
                particles,
                sweeps,
                samples,
                seed,
                out_dir,
            };
            let r = experiment::eval(&checkpoint, &dataset, &opts)?;
            println!("{}", serde_json_pretty(&r));
        }
    }
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("report serializes")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
