pub mod evaluate;
pub mod inspect;
pub mod sweep;
pub mod synth;
pub mod train;

use crate::{ModelFlags, TrainFlags, DATA_DIR_ENV};
use memchain::data::{default_aspects, expand_corpus, CorpusSplits, Instance};
use memchain::error::{Error, Result};
use memchain::model::{DelaySource, GateMode, ModelConfig};
use memchain::train::TrainConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Resolve a user-supplied path, retrying relative paths under
/// $MEMCHAIN_DATA_DIR when they do not exist as given.
pub fn resolve_path(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Ok(base) = std::env::var(DATA_DIR_ENV) {
            let candidate = Path::new(&base).join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::Config(format!("path {} does not exist", path.display())))
}

pub fn model_config(flags: &ModelFlags) -> Result<ModelConfig> {
    let gate_mode: GateMode = flags.gate_mode.parse()?;
    let delay_source = match flags.delay_source.as_str() {
        "current" => DelaySource::Current,
        "previous" => DelaySource::Previous,
        other => return Err(Error::Config(format!("unknown delay source {other:?}"))),
    };
    let cfg = ModelConfig {
        embed_dim: flags.dim,
        n_chains: flags.chains,
        n_tied_keys: flags.tied_chains,
        n_classes: 3,
        gate_mode,
        gru_hidden: flags.dim,
        delay_source,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train_config(flags: &TrainFlags) -> Result<TrainConfig> {
    if flags.precision != 32 && flags.precision != 64 {
        return Err(Error::Config(format!("precision must be 32 or 64, got {}", flags.precision)));
    }
    let cfg = TrainConfig {
        epochs: flags.epochs,
        batch_size: flags.batch,
        learning_rate: flags.lr,
        dropout_rate: flags.dropout,
        l2_lambda: flags.l2,
        ftrl_beta: 1.0,
        ftrl_l1: 0.0,
        seed: flags.seed,
        squared_penalty: flags.squared_penalty,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub struct PreparedCorpus {
    pub train: Vec<Instance>,
    pub val: Vec<Instance>,
    pub test: Vec<Instance>,
    pub aspects: Vec<String>,
}

pub fn prepare_corpus(splits: &CorpusSplits) -> Result<PreparedCorpus> {
    let aspects = default_aspects();
    Ok(PreparedCorpus {
        train: expand_corpus(&splits.train, &aspects)?,
        val: expand_corpus(&splits.val, &aspects)?,
        test: expand_corpus(&splits.test, &aspects)?,
        aspects,
    })
}

/// Resolved settings echoed into manifests.
#[derive(Serialize)]
pub struct ResolvedRunConfig {
    pub corpus: PathBuf,
    pub embeddings: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub precision_bits: u8,
}
