//! Sentence records, instance expansion over target × aspect grids, corpus
//! splits, and aspect embedding lookup.

use super::embeddings::EmbeddingTable;
use super::tokenize::{is_target_marker, tokenize};
use super::{Instance, Polarity};
use crate::error::{Error, Result};
use crate::model::InstanceInput;
use crate::real::Real;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawOpinion {
    pub target_entity: String,
    pub aspect: String,
    pub sentiment: String,
}

/// One annotated sentence in the corpus file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: i64,
    pub text: String,
    pub opinions: Vec<RawOpinion>,
}

/// Read a corpus file: a JSON array of records.
pub fn load_corpus(path: &Path) -> Result<Vec<SentenceRecord>> {
    let bytes = std::fs::read(path)?;
    let records: Vec<SentenceRecord> = serde_json::from_slice(&bytes)?;
    Ok(records)
}

/// Expand one tokenized record into the full (target present) × aspect grid.
/// Annotated slots carry their polarity, everything else is `none`.
/// Opinions on aspects outside `aspect_set` are filtered out.
pub fn expand_instances(
    rec: &SentenceRecord,
    tokens: &[String],
    aspect_set: &[String],
) -> Result<Vec<Instance>> {
    let mut targets: Vec<String> = Vec::new();
    for t in tokens {
        if is_target_marker(t) && !targets.iter().any(|x| x == t) {
            targets.push(t.clone());
        }
    }
    for op in &rec.opinions {
        let marker = op.target_entity.to_lowercase();
        if !aspect_set.iter().any(|a| a == &op.aspect.to_lowercase()) {
            continue;
        }
        if !targets.iter().any(|t| t == &marker) {
            return Err(Error::Integrity(format!(
                "sentence {}: opinion target {:?} does not appear in the text",
                rec.id, op.target_entity
            )));
        }
    }
    let mut out = Vec::with_capacity(targets.len() * aspect_set.len());
    for target in &targets {
        for aspect in aspect_set {
            let mut gold = Polarity::None;
            for op in &rec.opinions {
                if op.target_entity.to_lowercase() == *target
                    && op.aspect.to_lowercase() == *aspect
                {
                    gold = Polarity::parse_annotation(&op.sentiment).ok_or_else(|| {
                        Error::Integrity(format!(
                            "sentence {}: unknown sentiment {:?}",
                            rec.id, op.sentiment
                        ))
                    })?;
                    break;
                }
            }
            out.push(Instance {
                sentence_id: rec.id,
                tokens: tokens.to_vec(),
                target: target.clone(),
                aspect: aspect.clone(),
                gold,
            });
        }
    }
    Ok(out)
}

/// Tokenize and expand a whole corpus.
pub fn expand_corpus(
    records: &[SentenceRecord],
    aspect_set: &[String],
) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for rec in records {
        let tokens = tokenize(&rec.text)?;
        out.extend(expand_instances(rec, &tokens, aspect_set)?);
    }
    Ok(out)
}

/// Embedding for an aspect name: single words map directly, hyphenated
/// names ("transit-location") take the mean of their constituent words.
pub fn aspect_vector<F: Real>(
    aspect: &str,
    aspect_set: &[String],
    table: &EmbeddingTable<F>,
) -> Result<Vec<F>> {
    if !aspect_set.iter().any(|a| a == aspect) {
        return Err(Error::Config(format!("unknown aspect {aspect:?}")));
    }
    let words: Vec<&str> = aspect.split('-').filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        return Err(Error::Config(format!("aspect {aspect:?} has no words")));
    }
    let dim = table.dim();
    let mut mean = vec![F::zero(); dim];
    for w in &words {
        let v = table.vector(w)?;
        for (m, &x) in mean.iter_mut().zip(v) {
            *m = *m + x;
        }
    }
    let inv = F::from_f64(1.0 / words.len() as f64);
    for m in &mut mean {
        *m = *m * inv;
    }
    Ok(mean)
}

/// Register every token an instance set needs (sentence tokens, target
/// markers, aspect words) so later lookups are total.
pub fn register_tokens<F: Real>(
    table: &mut EmbeddingTable<F>,
    instances: &[Instance],
    aspect_set: &[String],
    tied_targets: &[String],
) {
    for inst in instances {
        for t in &inst.tokens {
            table.ensure(t);
        }
        table.ensure(&inst.target);
    }
    for aspect in aspect_set {
        for w in aspect.split('-').filter(|w| !w.is_empty()) {
            table.ensure(w);
        }
    }
    for t in tied_targets {
        table.ensure(&t.to_lowercase());
    }
}

/// Resolve an instance to embedding vectors plus its gold class index.
pub fn resolve_instance<F: Real>(
    inst: &Instance,
    table: &EmbeddingTable<F>,
    aspect_set: &[String],
) -> Result<(InstanceInput<F>, usize)> {
    let tokens: Vec<Vec<F>> = inst
        .tokens
        .iter()
        .map(|t| table.vector(t).map(<[F]>::to_vec))
        .collect::<Result<_>>()?;
    let target = table.vector(&inst.target)?.to_vec();
    let aspect = aspect_vector(&inst.aspect, aspect_set, table)?;
    Ok((InstanceInput { tokens, target, aspect }, inst.gold.class_index()))
}

/// The three corpus partitions.
pub struct CorpusSplits {
    pub train: Vec<SentenceRecord>,
    pub val: Vec<SentenceRecord>,
    pub test: Vec<SentenceRecord>,
}

const TRAIN_NAMES: [&str; 2] = ["train.json", "sentihood-train.json"];
const VAL_NAMES: [&str; 3] = ["val.json", "dev.json", "sentihood-dev.json"];
const TEST_NAMES: [&str; 2] = ["test.json", "sentihood-test.json"];

fn find_in(dir: &Path, names: &[&str]) -> Option<std::path::PathBuf> {
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

/// Load a split corpus. A directory must hold three split files
/// (train/val/test, Sentihood names also accepted); a single file is
/// partitioned 70/10/20 deterministically from `seed`.
pub fn load_split(path: &Path, seed: u64) -> Result<CorpusSplits> {
    let splits = if path.is_dir() {
        let train = find_in(path, &TRAIN_NAMES)
            .ok_or_else(|| Error::Config(format!("no train split found in {}", path.display())))?;
        let val = find_in(path, &VAL_NAMES)
            .ok_or_else(|| Error::Config(format!("no val split found in {}", path.display())))?;
        let test = find_in(path, &TEST_NAMES)
            .ok_or_else(|| Error::Config(format!("no test split found in {}", path.display())))?;
        CorpusSplits {
            train: load_corpus(&train)?,
            val: load_corpus(&val)?,
            test: load_corpus(&test)?,
        }
    } else {
        let mut all = load_corpus(path)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        let n = all.len();
        let n_train = ((n as f64) * 0.7).round() as usize;
        let n_val = ((n as f64) * 0.1).round() as usize;
        let test = all.split_off((n_train + n_val).min(n));
        let val = all.split_off(n_train.min(all.len()));
        CorpusSplits { train: all, val, test }
    };
    let mut seen: HashSet<i64> = HashSet::new();
    for rec in splits.train.iter().chain(&splits.val).chain(&splits.test) {
        if !seen.insert(rec.id) {
            return Err(Error::Integrity(format!("record id {} appears in more than one split", rec.id)));
        }
    }
    Ok(splits)
}
