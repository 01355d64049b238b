use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eegid_core::data::import::import_csv_dir;
use eegid_core::eval::{
    build_features, evaluate_on_split, preprocess_dataset, run_pipeline, train_on_split, tune_on_split,
    FeatureOptions, PipelineConfig,
};
use eegid_core::features::{FeatureMatrix, FeatureSet};
use eegid_core::kv::KeyValues;
use eegid_core::learn::{load_params, ModelKind, TrainedModel};
use eegid_core::synth::{synth_dataset, SynthConfig};
use eegid_core::{Error, Result};

#[derive(Parser)]
#[command(name = "eegid", version, about = "Subject identification from imagined-speech EEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subjects: Option<usize>,
        /// Trials per session, comma separated.
        #[arg(long, value_delimiter = ',')]
        trials: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        /// key=value generator settings; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Convert a directory of per-session CSV exports.
    Import {
        #[arg(long)]
        csv_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop bad trials, filter, repair channels and re-reference.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract one feature row per usable trial.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        set: FeatureSet,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Random search on the training sessions, scored on validation.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the final model on the training sessions.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: ModelKind,
        /// Tuning result or bare parameter JSON.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a model on the test sessions.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every stage and write all artifacts.
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            out,
            subjects,
            trials,
            seed,
            config,
        } => {
            let mut cfg = SynthConfig::default();
            if let Some(path) = config {
                cfg.apply_key_values(&KeyValues::load(path)?)?;
            }
            if let Some(n) = subjects {
                cfg.n_subjects = n;
            }
            if let Some(t) = trials {
                cfg.trials_per_session = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = synth_dataset(&cfg, &out)?;
            println!(
                "wrote {} sessions ({} trials) to {}",
                manifest.n_sessions(),
                manifest.n_trials(),
                out.display()
            );
        }
        Command::Import { csv_dir, out } => {
            let manifest = import_csv_dir(&csv_dir, &out)?;
            println!("imported {} sessions to {}", manifest.n_sessions(), out.display());
        }
        Command::Preprocess { manifest, out, config } => {
            let cfg = pipeline_config(config.as_deref())?;
            let (_, logs) = preprocess_dataset(&manifest, &cfg.preprocess, &out)?;
            let dropped: usize = logs.iter().map(|l| l.n_bad_dropped).sum();
            println!("preprocessed {} sessions, dropped {dropped} bad trials", logs.len());
        }
        Command::Features {
            manifest,
            set,
            out,
            config,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let options = FeatureOptions {
                set,
                ..FeatureOptions::from_config(&cfg)
            };
            let (matrix, _) = build_features(&manifest, &cfg.preprocess, &options)?;
            matrix.write(&out)?;
            println!("wrote {} rows x {} features to {}", matrix.n_rows(), matrix.n_features(), out.display());
        }
        Command::Tune {
            features,
            model,
            budget,
            seed,
            out,
            config,
        } => {
            let cfg = PipelineConfig {
                model,
                tune_budget: budget,
                seed,
                ..pipeline_config(config.as_deref())?
            };
            cfg.validate()?;
            let result = tune_on_split(&FeatureMatrix::read(&features)?, &cfg)?;
            result.save(&out)?;
            println!(
                "best trial {} validation accuracy {:.4}",
                result.best_trial, result.best_val_accuracy
            );
        }
        Command::Train {
            features,
            model,
            params,
            out,
            config,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let params = load_params(&params)?;
            if params.kind() != model {
                return Err(Error::Config(format!(
                    "--model {model} does not match {} parameters",
                    params.kind()
                )));
            }
            let (trained, sessions) = train_on_split(&FeatureMatrix::read(&features)?, &params, &cfg)?;
            trained.save(&out)?;
            println!("trained {model} on sessions {sessions:?}");
        }
        Command::Eval {
            model,
            features,
            report,
            config,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let trained = TrainedModel::load(&model)?;
            let result = evaluate_on_split(&trained, &FeatureMatrix::read(&features)?, &cfg)?;
            result.save(&report)?;
            println!("test accuracy {:.4} on {} trials", result.accuracy, result.n_test);
        }
        Command::Pipeline { manifest, config, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = run_pipeline(&manifest, &cfg, &out)?;
            println!(
                "test accuracy {:.4}, macro precision {:.4}, macro recall {:.4}",
                report.accuracy, report.macro_precision, report.macro_recall
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
