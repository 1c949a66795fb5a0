use super::resolve_path;
use crate::manifest::{now_unix, write_manifest};
use memchain::data::{default_aspects, expand_corpus, load_corpus, load_split, EmbeddingTable, Instance};
use memchain::error::{Error, Result};
use memchain::eval::{evaluate_records, predict_records, EvalReport, PredictionRecord};
use memchain::model::{read_header, read_params};
use memchain::real::Real;
use memchain::train::{default_tied_targets, mean_std, prepare_table};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct MeanStd {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct Aggregate {
    n_checkpoints: usize,
    aspect_strict_acc: MeanStd,
    aspect_macro_f1: MeanStd,
    aspect_macro_auc: Option<MeanStd>,
    sentiment_acc: MeanStd,
    sentiment_macro_auc: Option<MeanStd>,
}

#[derive(Serialize)]
struct EvalOutput {
    checkpoints: Vec<PathBuf>,
    reports: Vec<EvalReport>,
    aggregate: Option<Aggregate>,
}

#[derive(Serialize)]
struct EvalManifestConfig {
    corpus: PathBuf,
    embeddings: Option<PathBuf>,
    checkpoints: Vec<PathBuf>,
    predictions: Option<PathBuf>,
    seed: u64,
}

fn test_instances(corpus: &Path, seed: u64) -> Result<Vec<Instance>> {
    let aspects = default_aspects();
    let records = if corpus.is_dir() {
        load_split(corpus, seed)?.test
    } else {
        load_corpus(corpus)?
    };
    let instances = expand_corpus(&records, &aspects)?;
    if instances.is_empty() {
        return Err(Error::Config("empty test set".into()));
    }
    Ok(instances)
}

fn eval_checkpoint<F: Real>(
    ckpt: &Path,
    embeddings: &Path,
    instances: &[Instance],
) -> Result<EvalReport> {
    let (header, params) = read_params::<F>(ckpt)?;
    let mut table = EmbeddingTable::<F>::load(embeddings, header.config.embed_dim)?;
    if table.vocab_hash() != header.vocab_hash {
        return Err(Error::Incompatible(format!(
            "checkpoint {} was trained against a different embedding vocabulary \
             (hash {:#x} vs {:#x})",
            ckpt.display(),
            header.vocab_hash,
            table.vocab_hash()
        )));
    }
    let aspects = default_aspects();
    let tied = default_tied_targets(header.config.n_tied_keys);
    prepare_table(&mut table, &[instances], &aspects, &tied);
    let records = predict_records(&params, &header.config, &table, &aspects, instances)?;
    evaluate_records(&records, &aspects)
}

pub fn run(
    checkpoint: Option<&Path>,
    corpus: &Path,
    embeddings: Option<&Path>,
    predictions: Option<&Path>,
    out: Option<&Path>,
    seed: u64,
) -> Result<u8> {
    let started = now_unix();
    let corpus = resolve_path(corpus)?;
    let instances = test_instances(&corpus, seed)?;
    let aspects = default_aspects();

    let (output, manifest_cfg) = if let Some(pred_path) = predictions {
        let pred_path = resolve_path(pred_path)?;
        let bytes = std::fs::read(&pred_path)?;
        let records: Vec<PredictionRecord> = serde_json::from_slice(&bytes)?;
        let report = evaluate_records(&records, &aspects)?;
        (
            EvalOutput { checkpoints: vec![], reports: vec![report], aggregate: None },
            EvalManifestConfig {
                corpus,
                embeddings: None,
                checkpoints: vec![],
                predictions: Some(pred_path),
                seed,
            },
        )
    } else {
        let ckpt_arg = checkpoint.ok_or_else(|| {
            Error::Config("either --checkpoint or --predictions is required".into())
        })?;
        let ckpt_arg = resolve_path(ckpt_arg)?;
        let embeddings = resolve_path(
            embeddings.ok_or_else(|| Error::Config("--embeddings is required".into()))?,
        )?;
        let mut ckpts: Vec<PathBuf> = if ckpt_arg.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(&ckpt_arg)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "ckpt").unwrap_or(false))
                .collect();
            v.sort();
            v
        } else {
            vec![ckpt_arg.clone()]
        };
        if ckpts.is_empty() {
            return Err(Error::Config(format!(
                "no .ckpt files under {}",
                ckpt_arg.display()
            )));
        }
        ckpts.dedup();
        let mut reports = Vec::with_capacity(ckpts.len());
        for ckpt in &ckpts {
            let header = read_header(ckpt)?;
            let report = match header.precision_bits {
                64 => eval_checkpoint::<f64>(ckpt, &embeddings, &instances)?,
                _ => eval_checkpoint::<f32>(ckpt, &embeddings, &instances)?,
            };
            reports.push(report);
        }
        let aggregate = if reports.len() > 1 {
            let collect = |f: fn(&EvalReport) -> f64| -> MeanStd {
                let vals: Vec<f64> = reports.iter().map(f).collect();
                let (mean, std) = mean_std(&vals);
                MeanStd { mean, std }
            };
            let auc_vals: Vec<f64> =
                reports.iter().filter_map(|r| r.aspect_macro_auc).collect();
            let sauc_vals: Vec<f64> =
                reports.iter().filter_map(|r| r.sentiment_macro_auc).collect();
            Some(Aggregate {
                n_checkpoints: reports.len(),
                aspect_strict_acc: collect(|r| r.aspect_strict_acc),
                aspect_macro_f1: collect(|r| r.aspect_macro_f1),
                aspect_macro_auc: (auc_vals.len() == reports.len()).then(|| {
                    let (mean, std) = mean_std(&auc_vals);
                    MeanStd { mean, std }
                }),
                sentiment_acc: collect(|r| r.sentiment_acc),
                sentiment_macro_auc: (sauc_vals.len() == reports.len()).then(|| {
                    let (mean, std) = mean_std(&sauc_vals);
                    MeanStd { mean, std }
                }),
            })
        } else {
            None
        };
        (
            EvalOutput { checkpoints: ckpts.clone(), reports, aggregate },
            EvalManifestConfig {
                corpus,
                embeddings: Some(embeddings),
                checkpoints: ckpts,
                predictions: None,
                seed,
            },
        )
    };

    for (i, r) in output.reports.iter().enumerate() {
        println!(
            "[{}] aspect: strict {:.4}, F1 {:.4}, AUC {}; sentiment: acc {:.4}, AUC {}",
            i,
            r.aspect_strict_acc,
            r.aspect_macro_f1,
            r.aspect_macro_auc.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
            r.sentiment_acc,
            r.sentiment_macro_auc.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
        );
    }
    if let Some(agg) = &output.aggregate {
        println!(
            "aggregate over {} checkpoints: aspect F1 {:.4} +- {:.4}, sentiment acc {:.4} +- {:.4}",
            agg.n_checkpoints,
            agg.aspect_macro_f1.mean,
            agg.aspect_macro_f1.std,
            agg.sentiment_acc.mean,
            agg.sentiment_acc.std
        );
    }

    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("report.json"));
    std::fs::write(&out_path, serde_json::to_string_pretty(&output)?)?;
    let manifest_path = out_path.with_extension("manifest.json");
    write_manifest(&manifest_path, "evaluate", manifest_cfg, started)?;
    Ok(0)
}
