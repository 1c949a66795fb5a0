use super::{model_config, prepare_corpus, resolve_path, train_config};
use crate::manifest::{now_unix, write_manifest};
use crate::{ModelFlags, TrainFlags};
use memchain::data::{load_split, EmbeddingTable};
use memchain::error::{Error, Result};
use memchain::real::Real;
use memchain::train::{default_tied_targets, prepare_table, sweep_chains, SweepPoint, TrainConfig};
use memchain::model::ModelConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct SweepManifestConfig {
    corpus: PathBuf,
    embeddings: PathBuf,
    n_min: usize,
    n_max: usize,
    runs: usize,
    model: ModelConfig,
    train: TrainConfig,
    precision_bits: u8,
}

#[derive(Serialize)]
struct SweepOutput {
    points: Vec<SweepPoint>,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    corpus: &Path,
    embeddings: &Path,
    n_min: usize,
    n_max: usize,
    runs: usize,
    model_flags: &ModelFlags,
    train_flags: &TrainFlags,
    out: &Path,
) -> Result<u8> {
    let started = now_unix();
    if n_min < 2 {
        return Err(Error::Config(
            "sweep requires n >= 2: two tied target chains are mandatory".into(),
        ));
    }
    if n_max < n_min {
        return Err(Error::Config(format!("n-max {n_max} below n-min {n_min}")));
    }
    let corpus = resolve_path(corpus)?;
    let embeddings = resolve_path(embeddings)?;
    // The sweep overrides n_chains and ties two keys; other model flags pass
    // through. Validate against n_min (every n in the range re-validates).
    let base_model = model_config(&ModelFlags {
        chains: n_min,
        tied_chains: 2,
        ..model_flags.clone()
    })?;
    let train_cfg = train_config(train_flags)?;
    let n_values: Vec<usize> = (n_min..=n_max).collect();

    let points = if train_flags.precision == 64 {
        run_at::<f64>(&corpus, &embeddings, &base_model, &train_cfg, &n_values, runs)?
    } else {
        run_at::<f32>(&corpus, &embeddings, &base_model, &train_cfg, &n_values, runs)?
    };

    for p in &points {
        println!(
            "n = {:>2}: aspect F1 {:.4} +- {:.4}  (runs: {})",
            p.n_chains,
            p.mean_f1,
            p.std_f1,
            p.run_f1.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        );
    }
    std::fs::write(out, serde_json::to_string_pretty(&SweepOutput { points })?)?;
    write_manifest(
        &out.with_extension("manifest.json"),
        "sweep-chains",
        SweepManifestConfig {
            corpus,
            embeddings,
            n_min,
            n_max,
            runs,
            model: base_model,
            train: train_cfg,
            precision_bits: train_flags.precision,
        },
        started,
    )?;
    Ok(0)
}

fn run_at<F: Real>(
    corpus: &Path,
    embeddings: &Path,
    base_model: &ModelConfig,
    train_cfg: &TrainConfig,
    n_values: &[usize],
    runs: usize,
) -> Result<Vec<SweepPoint>> {
    let splits = load_split(corpus, train_cfg.seed)?;
    let prepared = prepare_corpus(&splits)?;
    let mut table = EmbeddingTable::<F>::load(embeddings, base_model.embed_dim)?;
    prepare_table(
        &mut table,
        &[&prepared.train, &prepared.val, &prepared.test],
        &prepared.aspects,
        &default_tied_targets(2),
    );
    sweep_chains(
        &prepared.train,
        &prepared.val,
        &prepared.test,
        &table,
        &prepared.aspects,
        base_model,
        train_cfg,
        n_values,
        runs,
        train_cfg.seed,
    )
}
