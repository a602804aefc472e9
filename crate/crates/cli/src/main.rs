//! `toponym` — train, run, and evaluate the context-window toponym detector.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
//! Relative paths that do not exist are retried under `$TOPO_DATA_DIR`.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "toponym",
    version,
    about = "Toponym detection with a context-window feed-forward classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file (flat key = value with [features]/[training]/[arch]/[paths])
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset name (nopunct, nostop, baseline, basic, cap, pos, weighted, full)
    #[arg(long)]
    preset: Option<String>,
    /// Corpus directory override
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Word-vector file override
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Stop-word list override (one entry per line)
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// RNG seed override
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with its history TSV
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        /// Model output path override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotate text files, writing `<id>.pred.ann` span files
    Predict {
        #[command(flatten)]
        common: ConfigArgs,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Output directory for the annotation files
        #[arg(long, default_value = "predictions")]
        out: PathBuf,
    },
    /// Score predicted span files against gold annotations
    Evaluate {
        /// Directory of gold `<id>.txt` / `<id>.ann` pairs
        #[arg(long)]
        gold: PathBuf,
        /// Directory of predicted `<id>.pred.ann` (or `<id>.ann`) files
        #[arg(long)]
        pred: PathBuf,
        /// Also write the report TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score every variant of an ablation spec (default: all presets)
    Ablate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Spec file: one preset name or .conf path per line
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Comma-separated seed list; several seeds report per-row means
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Also write the table TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per context size and report test metrics per size
    SweepWindow {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        min_c: usize,
        #[arg(long, default_value_t = 7)]
        max_c: usize,
        /// Also write the sweep TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-split corpus statistics
    Stats {
        #[command(flatten)]
        common: ConfigArgs,
        /// Also write the statistics TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Out-of-vocabulary accounting for one or two embedding files
    Oov {
        #[command(flatten)]
        common: ConfigArgs,
        /// Second embedding file; adds rows for it and the concatenation
        #[arg(long)]
        secondary: Option<PathBuf>,
        /// Also write the report TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-token prediction confidences of a trained model on the test split
    Confidences {
        #[command(flatten)]
        common: ConfigArgs,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Sample this many gold-toponym and gold-non-toponym tokens
        #[arg(long)]
        sample: Option<usize>,
        /// Also write the dump TSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Builds the effective configuration: defaults, then preset, then config
/// file, then flag overrides.
fn build_config(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut run = RunConfig::default();
    if let Some(preset) = &args.preset {
        run = config::apply_preset(run, preset).map_err(CliError::Validation)?;
    }
    if let Some(path) = &args.config {
        let path = config::resolve_path(path);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            CliError::Validation(format!("--config: cannot read {}: {e}", path.display()))
        })?;
        run = config::apply_conf(run, &text, &path.display().to_string())
            .map_err(CliError::Validation)?;
    }
    if let Some(corpus) = &args.corpus {
        run.paths.corpus_dir = Some(corpus.clone());
    }
    if let Some(embeddings) = &args.embeddings {
        run.paths.embeddings = Some(embeddings.clone());
    }
    if let Some(stopwords) = &args.stopwords {
        run.paths.stopwords = Some(stopwords.clone());
    }
    if let Some(seed) = args.seed {
        run.training.seed = seed;
    }
    Ok(run)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { common, out } => {
            let mut run = build_config(&common)?;
            if let Some(out) = out {
                run.paths.model_out = Some(out);
            }
            commands::cmd_train(&run)
        }
        Command::Predict { common, model, out } => {
            let run = build_config(&common)?;
            let input = run.paths.corpus_dir.clone().ok_or_else(|| {
                CliError::Validation("predict needs --corpus (file or directory)".into())
            })?;
            commands::cmd_predict(&run, &model, &input, &out)
        }
        Command::Evaluate { gold, pred, out } => {
            commands::cmd_evaluate(&gold, &pred, out.as_deref())
        }
        Command::Ablate {
            common,
            spec,
            seeds,
            out,
        } => {
            let run = build_config(&common)?;
            commands::cmd_ablate(&run, spec.as_deref(), &seeds, out.as_deref())
        }
        Command::SweepWindow {
            common,
            min_c,
            max_c,
            out,
        } => {
            let run = build_config(&common)?;
            commands::cmd_sweep_window(&run, min_c, max_c, out.as_deref())
        }
        Command::Stats { common, out } => {
            let run = build_config(&common)?;
            commands::cmd_stats(&run, out.as_deref())
        }
        Command::Oov {
            common,
            secondary,
            out,
        } => {
            let run = build_config(&common)?;
            let embeddings = run.paths.embeddings.clone().ok_or_else(|| {
                CliError::Validation("oov needs --embeddings (or [paths] embeddings)".into())
            })?;
            let corpus = run.paths.corpus_dir.clone().ok_or_else(|| {
                CliError::Validation("oov needs --corpus (or [paths] corpus_dir)".into())
            })?;
            commands::cmd_oov(&run, &embeddings, secondary.as_deref(), &corpus, out.as_deref())
        }
        Command::Confidences {
            common,
            model,
            sample,
            out,
        } => {
            let run = build_config(&common)?;
            commands::cmd_confidences(&run, &model, sample, out.as_deref())
        }
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
