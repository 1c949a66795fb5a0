use super::resolve_path;
use crate::manifest::{now_unix, write_manifest};
use memchain::data::{default_aspects, load_corpus, tokenize, EmbeddingTable};
use memchain::error::{Error, Result};
use memchain::eval::{export_gate_heatmap, write_heatmap_csv, HeatmapRow};
use memchain::model::{predict_instance, read_header, read_params, GateMode, InstanceInput, ModelConfig};
use memchain::real::Real;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct InspectManifestConfig {
    checkpoint: PathBuf,
    embeddings: PathBuf,
    corpus: Option<PathBuf>,
    sentence_id: Option<i64>,
    text: Option<String>,
    compare: Option<String>,
    gate_mode: GateMode,
    seed: u64,
}

fn sentence_tokens(
    corpus: Option<&Path>,
    sentence_id: Option<i64>,
    text: Option<&str>,
    seed: u64,
) -> Result<Vec<String>> {
    match (text, sentence_id) {
        (Some(t), _) => tokenize(t),
        (None, Some(id)) => {
            let corpus = corpus.ok_or_else(|| {
                Error::Config("--sentence-id needs --corpus to look the sentence up in".into())
            })?;
            let corpus = resolve_path(corpus)?;
            let records = if corpus.is_dir() {
                let split = memchain::data::load_split(&corpus, seed)?;
                let mut all = split.train;
                all.extend(split.val);
                all.extend(split.test);
                all
            } else {
                load_corpus(&corpus)?
            };
            let rec = records
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| Error::Config(format!("sentence id {id} not found")))?;
            tokenize(&rec.text)
        }
        (None, None) => Err(Error::Config("supply --text or --sentence-id".into())),
    }
}

fn heatmap_for<F: Real>(
    ckpt: &Path,
    embeddings: &Path,
    tokens: &[String],
    gate_mode_override: Option<GateMode>,
) -> Result<(Vec<HeatmapRow>, GateMode)> {
    let (header, params) = read_params::<F>(ckpt)?;
    let mut table = EmbeddingTable::<F>::load(embeddings, header.config.embed_dim)?;
    if table.vocab_hash() != header.vocab_hash {
        return Err(Error::Incompatible(
            "checkpoint was trained against a different embedding vocabulary".into(),
        ));
    }
    for t in tokens {
        table.ensure(t);
    }
    let cfg = ModelConfig {
        gate_mode: gate_mode_override.unwrap_or(header.config.gate_mode),
        ..header.config.clone()
    };
    // Query vectors are irrelevant to the gate trace but the forward pass
    // needs them; use the first tied target and the first aspect.
    let aspects = default_aspects();
    table.ensure("loc1");
    for w in aspects[0].split('-') {
        table.ensure(w);
    }
    let input = InstanceInput {
        tokens: tokens
            .iter()
            .map(|t| table.vector(t).map(<[F]>::to_vec))
            .collect::<Result<_>>()?,
        target: table.vector("loc1")?.to_vec(),
        aspect: memchain::data::aspect_vector(&aspects[0], &aspects, &table)?,
    };
    let (_, trace) = predict_instance(&params, &cfg, &input, true)?;
    let rows = export_gate_heatmap(&trace.expect("trace requested"), tokens)?;
    Ok((rows, cfg.gate_mode))
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    checkpoint: &Path,
    embeddings: &Path,
    corpus: Option<&Path>,
    sentence_id: Option<i64>,
    text: Option<&str>,
    compare: Option<&str>,
    out: &Path,
    seed: u64,
) -> Result<u8> {
    let started = now_unix();
    let checkpoint = resolve_path(checkpoint)?;
    let embeddings = resolve_path(embeddings)?;
    let tokens = sentence_tokens(corpus, sentence_id, text, seed)?;
    let header = read_header(&checkpoint)?;

    let run_mode = |mode: Option<GateMode>| -> Result<(Vec<HeatmapRow>, GateMode)> {
        match header.precision_bits {
            64 => heatmap_for::<f64>(&checkpoint, &embeddings, &tokens, mode),
            _ => heatmap_for::<f32>(&checkpoint, &embeddings, &tokens, mode),
        }
    };

    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    let compare_mode: Option<GateMode> = match compare {
        Some(m) => Some(m.parse()?),
        None => None,
    };
    if let Some(other) = compare_mode {
        let (base_rows, base_mode) = run_mode(None)?;
        let (cmp_rows, cmp_mode) = run_mode(Some(other))?;
        let base_label = format!("{base_mode:?}").to_lowercase();
        let cmp_label = format!("{cmp_mode:?}").to_lowercase();
        write_heatmap_csv(&mut file, &base_rows, Some(&base_label), true)?;
        write_heatmap_csv(&mut file, &cmp_rows, Some(&cmp_label), false)?;
    } else {
        let (rows, _) = run_mode(None)?;
        write_heatmap_csv(&mut file, &rows, None, true)?;
    }
    use std::io::Write;
    file.flush()?;

    write_manifest(
        &out.with_extension("manifest.json"),
        "inspect-gates",
        InspectManifestConfig {
            checkpoint,
            embeddings,
            corpus: corpus.map(Path::to_path_buf),
            sentence_id,
            text: text.map(str::to_string),
            compare: compare.map(str::to_string),
            gate_mode: header.config.gate_mode,
            seed,
        },
        started,
    )?;
    println!("{} tokens written to {}", tokens.len(), out.display());
    Ok(0)
}
