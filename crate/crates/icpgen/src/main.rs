//! Thin command-line front end over [`icpgen::experiment`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icpgen::experiment::{self, ConditioningSpec, ExperimentConfig, PRESET_NAMES};
use icpgen::Error;

#[derive(Parser)]
#[command(
    name = "icpgen",
    version,
    about = "Train generative networks by iterative closest-point matching",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator and write a run directory of artifacts.
    Train {
        /// JSON experiment config (mutually exclusive with --preset).
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset name; see `icpgen presets`.
        #[arg(long)]
        preset: Option<String>,
        /// Override the config's rng seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Run directory (default runs/<preset-or-config-stem>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace artifacts of an existing run directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Generate samples from a trained checkpoint into a CSV file.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config snapshot (default: config.json next to the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of samples (unconditioned nets only; 0 writes just the header).
        #[arg(long)]
        count: Option<usize>,
        /// For conditioned nets: `each:K` or a CSV file of conditioning rows.
        #[arg(long)]
        conditioning: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Sampling seed (default: the training seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Compare checkpoint generations against fresh target samples.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Config snapshot (default: config.json next to the checkpoint).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Batch size for the comparison (exact EMD up to 2000).
        #[arg(long, default_value_t = 1000)]
        sample_size: usize,
        /// Allow large sample sizes via the greedy EMD upper bound.
        #[arg(long)]
        approx: bool,
        /// Evaluation seed (default: the training seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List built-in experiment presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match experiment::init_thread_pool_from_env().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::CheckpointMismatch(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Train {
            config,
            preset,
            seed,
            epochs,
            out,
            overwrite,
        } => {
            let mut experiment_config: ExperimentConfig = match (&config, &preset) {
                (Some(path), None) => experiment::load_config(path)?,
                (None, Some(name)) => experiment::preset(name)?,
                _ => {
                    return Err(Error::InvalidConfig(
                        "pass exactly one of --config or --preset".into(),
                    ))
                }
            };
            if let Some(s) = seed {
                experiment_config.train.seed = s;
            }
            if let Some(e) = epochs {
                experiment_config.train.epochs = e;
            }
            let out = out.unwrap_or_else(|| default_out_dir(&preset, &config));
            let artifacts = experiment::run_train(&experiment_config, &out, overwrite)?;
            if let Some(last) = artifacts.history.last() {
                println!("final matched_cost_mean: {}", last.matched_cost_mean);
            }
            println!("checkpoint: {}", artifacts.final_checkpoint.display());
            println!("metrics: {}", artifacts.convergence_csv.display());
            Ok(())
        }
        Command::Sample {
            checkpoint,
            config,
            count,
            conditioning,
            out,
            seed,
            overwrite,
        } => {
            let spec = conditioning
                .as_deref()
                .map(ConditioningSpec::parse)
                .transpose()?;
            experiment::run_sample(
                &checkpoint,
                config.as_deref(),
                count,
                spec.as_ref(),
                &out,
                seed,
                overwrite,
            )?;
            println!("samples: {}", out.display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            config,
            sample_size,
            approx,
            seed,
        } => {
            let report =
                experiment::run_eval(&checkpoint, config.as_deref(), sample_size, approx, seed)?;
            print!("{report}");
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name:<22} {}", experiment::preset_summary(name));
            }
            Ok(())
        }
    }
}

fn default_out_dir(preset: &Option<String>, config: &Option<PathBuf>) -> PathBuf {
    let stem = preset
        .clone()
        .or_else(|| {
            config
                .as_ref()
                .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        })
        .unwrap_or_else(|| "run".into());
    PathBuf::from("runs").join(stem)
}
