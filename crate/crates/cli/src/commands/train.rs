use super::{model_config, prepare_corpus, resolve_path, train_config, ResolvedRunConfig};
use crate::manifest::{now_unix, write_manifest};
use crate::{ModelFlags, TrainFlags};
use memchain::data::{load_split, EmbeddingTable};
use memchain::error::Result;
use memchain::model::write_params;
use memchain::real::Real;
use memchain::train::{
    default_tied_targets, prepare_table, train_from_scratch, TrainConfig, TrainOutput,
};
use std::io::Write;
use std::path::Path;

pub fn run(
    corpus: &Path,
    embeddings: &Path,
    model_flags: &ModelFlags,
    train_flags: &TrainFlags,
    out: &Path,
) -> Result<u8> {
    let started = now_unix();
    let corpus = resolve_path(corpus)?;
    let embeddings = resolve_path(embeddings)?;
    let model_cfg = model_config(model_flags)?;
    let train_cfg = train_config(train_flags)?;
    std::fs::create_dir_all(out)?;

    let code = if train_flags.precision == 64 {
        run_at::<f64>(&corpus, &embeddings, &model_cfg, &train_cfg, out)?
    } else {
        run_at::<f32>(&corpus, &embeddings, &model_cfg, &train_cfg, out)?
    };
    write_manifest(
        &out.join("manifest.json"),
        "train",
        ResolvedRunConfig {
            corpus,
            embeddings,
            model: model_cfg,
            train: train_cfg,
            precision_bits: train_flags.precision,
        },
        started,
    )?;
    Ok(code)
}

fn run_at<F: Real>(
    corpus: &Path,
    embeddings: &Path,
    model_cfg: &memchain::model::ModelConfig,
    train_cfg: &TrainConfig,
    out: &Path,
) -> Result<u8> {
    let splits = load_split(corpus, train_cfg.seed)?;
    let prepared = prepare_corpus(&splits)?;
    let mut table = EmbeddingTable::<F>::load(embeddings, model_cfg.embed_dim)?;
    let report = table.report().clone();
    eprintln!(
        "embeddings: {} loaded, {} duplicate lines, {} empty lines",
        report.loaded, report.duplicates, report.empty
    );
    let tied_targets = default_tied_targets(model_cfg.n_tied_keys);
    prepare_table(
        &mut table,
        &[&prepared.train, &prepared.val, &prepared.test],
        &prepared.aspects,
        &tied_targets,
    );

    let output: TrainOutput<F> = train_from_scratch(
        &prepared.train,
        &prepared.val,
        &table,
        &prepared.aspects,
        &tied_targets,
        model_cfg,
        train_cfg,
    )?;

    let mut log = std::io::BufWriter::new(std::fs::File::create(out.join("log.jsonl"))?);
    for record in &output.log {
        writeln!(log, "{}", serde_json::to_string(record)?)?;
    }
    log.flush()?;
    write_params(&out.join("checkpoint.ckpt"), model_cfg, &output.params, table.vocab_hash())?;

    if let Some(why) = &output.diverged {
        eprintln!("training diverged: {why}; last-good checkpoint written");
        return Ok(3);
    }
    if let Some(best) = output.best_epoch {
        let last = output.log.last().expect("nonempty log");
        println!(
            "best epoch {best}: val aspect F1 {:.4}, strict acc {:.4}; final mean loss {:.6}",
            output.log[best].val.aspect_macro_f1,
            output.log[best].val.aspect_strict_acc,
            last.mean_loss
        );
    }
    Ok(0)
}
