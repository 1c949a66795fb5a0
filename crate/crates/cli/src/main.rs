//! Command-line harness for the memory-chain model.
//!
//! Exit codes: 0 success, 2 input/configuration error, 3 numeric
//! divergence, 4 artifact incompatibility.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use memchain::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable holding the default data directory; relative
/// --corpus / --embeddings paths that do not exist as given are retried
/// under it.
pub const DATA_DIR_ENV: &str = "MEMCHAIN_DATA_DIR";

#[derive(Parser)]
#[command(name = "memchain", version, about = "Memory-chain network for targeted aspect-based sentiment analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelFlags {
    /// Embedding / memory dimensionality.
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    /// Number of memory chains.
    #[arg(long, default_value_t = 6)]
    pub chains: usize,
    /// Leading chains whose keys are tied to LOC1, LOC2, ...
    #[arg(long = "tied-chains", default_value_t = 2)]
    pub tied_chains: usize,
    /// Gate mode: delayed | entnet.
    #[arg(long = "gate-mode", default_value = "delayed")]
    pub gate_mode: String,
    /// Which delay state the gate reads: current | previous.
    #[arg(long = "delay-source", default_value = "current")]
    pub delay_source: String,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 800)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Classifier-weight penalty coefficient.
    #[arg(long, default_value_t = 0.001)]
    pub l2: f64,
    /// Use the squared Frobenius norm in the penalty.
    #[arg(long = "squared-penalty", default_value_t = false)]
    pub squared_penalty: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Training precision: 32 | 64.
    #[arg(long, default_value_t = 32)]
    pub precision: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the best-validation checkpoint.
    Train {
        /// Corpus: a split directory (train/val/test files) or a single
        /// file, self-split 70/10/20 from the seed.
        #[arg(long)]
        corpus: PathBuf,
        /// Text-format embedding file (token v1 ... v_dim per line).
        #[arg(long)]
        embeddings: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Output directory for checkpoint.ckpt, log.jsonl, manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint (or a directory of checkpoints) on a corpus.
    Evaluate {
        /// Checkpoint file, or a directory whose *.ckpt files are averaged.
        #[arg(long, required_unless_present = "predictions")]
        checkpoint: Option<PathBuf>,
        /// Test corpus file (or split directory; the test split is used).
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, required_unless_present = "predictions")]
        embeddings: Option<PathBuf>,
        /// Pre-computed prediction records (JSON); bypasses the model.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Report output path (JSON). Defaults to report.json next to the
        /// checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Export per-token gate values for one sentence.
    InspectGates {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Corpus file to pull --sentence-id from.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long = "sentence-id")]
        sentence_id: Option<i64>,
        /// Raw sentence text (tokenized exactly like corpus ingestion).
        #[arg(long)]
        text: Option<String>,
        /// Also run the other gate mode side by side: delayed | entnet.
        #[arg(long)]
        compare: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Chain-count sensitivity sweep: train runs-per-n seeds for each n.
    SweepChains {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long = "n-min", default_value_t = 2)]
        n_min: usize,
        #[arg(long = "n-max", default_value_t = 10)]
        n_max: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Report output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus plus embeddings from a spec file.
    Synth {
        /// TOML spec (counts, seed, distance distribution). Defaults apply
        /// for missing keys; omit the flag entirely for a default corpus.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for corpus.json, embeddings.txt, manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec sentence count.
        #[arg(long)]
        sentences: Option<usize>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Incompatible(_) => 4,
        Error::Diverged { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { corpus, embeddings, model, train, out } => {
            commands::train::run(&corpus, &embeddings, &model, &train, &out)
        }
        Command::Evaluate { checkpoint, corpus, embeddings, predictions, out, seed } => {
            commands::evaluate::run(
                checkpoint.as_deref(),
                &corpus,
                embeddings.as_deref(),
                predictions.as_deref(),
                out.as_deref(),
                seed,
            )
        }
        Command::InspectGates {
            checkpoint,
            embeddings,
            corpus,
            sentence_id,
            text,
            compare,
            out,
            seed,
        } => commands::inspect::run(
            &checkpoint,
            &embeddings,
            corpus.as_deref(),
            sentence_id,
            text.as_deref(),
            compare.as_deref(),
            &out,
            seed,
        ),
        Command::SweepChains { corpus, embeddings, n_min, n_max, runs, model, train, out } => {
            commands::sweep::run(&corpus, &embeddings, n_min, n_max, runs, &model, &train, &out)
        }
        Command::Synth { spec, out, seed, sentences } => {
            commands::synth::run(spec.as_deref(), &out, seed, sentences)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
