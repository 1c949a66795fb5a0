//! Synthetic corpus generation: templated sentences where cue words carrying
//! the (aspect, polarity) signal sit a controlled token distance away from
//! their target mention. Desk-scale stand-in for the full dataset; also the
//! substrate for the delayed-trigger and chain-capacity checks.

use super::{default_aspects, RawOpinion, SentenceRecord};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sentences: usize,
    /// Every sentence mentions exactly this many targets (LOC1, LOC2, ...).
    pub targets_per_sentence: usize,
    pub seed: u64,
    /// Token distance between a target and each of its cue words, sampled
    /// uniformly from [distance_min, distance_max].
    pub distance_min: usize,
    pub distance_max: usize,
    /// Probability that a cue lands before its target instead of after.
    pub cue_before_prob: f64,
    /// Opinions per target, sampled uniformly from [opinions_min, opinions_max].
    pub opinions_min: usize,
    pub opinions_max: usize,
    /// Number of distinct filler words.
    pub filler_vocab: usize,
    /// Distinct cue words per (aspect, polarity) slot.
    pub cues_per_slot: usize,
    pub embed_dim: usize,
    /// Norm of each generated embedding vector.
    pub embed_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            sentences: 100,
            targets_per_sentence: 2,
            seed: 0,
            distance_min: 1,
            distance_max: 4,
            cue_before_prob: 0.0,
            opinions_min: 1,
            opinions_max: 2,
            filler_vocab: 30,
            cues_per_slot: 2,
            embed_dim: 16,
            embed_scale: 1.0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.sentences == 0 || self.targets_per_sentence == 0 {
            return Err(Error::Config("sentences and targets_per_sentence must be positive".into()));
        }
        if self.distance_min > self.distance_max {
            return Err(Error::Config("distance_min exceeds distance_max".into()));
        }
        if self.opinions_min > self.opinions_max || self.opinions_max > 4 {
            return Err(Error::Config("opinions range must fit within the 4 aspects".into()));
        }
        if self.opinions_min == 0 {
            return Err(Error::Config("opinions_min must be at least 1".into()));
        }
        if self.filler_vocab == 0 || self.cues_per_slot == 0 {
            return Err(Error::Config("filler_vocab and cues_per_slot must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.cue_before_prob) {
            return Err(Error::Config("cue_before_prob must lie in [0, 1]".into()));
        }
        if self.embed_dim == 0 || self.embed_scale <= 0.0 {
            return Err(Error::Config("embed_dim and embed_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<SentenceRecord>,
    /// Every vocabulary word with its generated embedding, ready to serve as
    /// an embedding file.
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub aspects: Vec<String>,
}

fn cue_token(aspect: &str, positive: bool, idx: usize) -> String {
    let stem: String = aspect.chars().filter(|c| c.is_alphanumeric()).collect();
    format!("{stem}{}{idx}", if positive { "pos" } else { "neg" })
}

/// Generate a corpus plus embeddings for its whole vocabulary.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let aspects = default_aspects();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut records = Vec::with_capacity(spec.sentences);
    for sid in 0..spec.sentences {
        let mut tokens: Vec<String> = Vec::new();
        let mut opinions = Vec::new();
        for t in 1..=spec.targets_per_sentence {
            let marker = format!("LOC{t}");
            let n_op = rng.gen_range(spec.opinions_min..=spec.opinions_max);
            let mut order: Vec<usize> = (0..aspects.len()).collect();
            order.shuffle(&mut rng);
            let chosen = &order[..n_op];

            let mut before: Vec<String> = Vec::new();
            let mut after: Vec<String> = Vec::new();
            for &ai in chosen {
                let positive = rng.gen_bool(0.5);
                let cue = cue_token(&aspects[ai], positive, rng.gen_range(0..spec.cues_per_slot));
                let distance = rng.gen_range(spec.distance_min..=spec.distance_max);
                let fillers: Vec<String> =
                    (0..distance).map(|_| format!("f{}", rng.gen_range(0..spec.filler_vocab))).collect();
                if rng.gen_bool(spec.cue_before_prob) {
                    // cue sits `distance` tokens before the target
                    before.push(cue.clone());
                    before.extend(fillers);
                } else {
                    after.extend(fillers);
                    after.push(cue.clone());
                }
                opinions.push(RawOpinion {
                    target_entity: marker.clone(),
                    aspect: aspects[ai].clone(),
                    sentiment: if positive { "Positive".into() } else { "Negative".into() },
                });
            }
            tokens.extend(before);
            tokens.push(marker);
            tokens.extend(after);
        }
        tokens.push(".".into());
        records.push(SentenceRecord { id: sid as i64, text: tokens.join(" "), opinions });
    }

    // Vocabulary in a canonical order so embedding draws are reproducible.
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for t in 1..=spec.targets_per_sentence {
        vocab.insert(format!("loc{t}"));
    }
    for i in 0..spec.filler_vocab {
        vocab.insert(format!("f{i}"));
    }
    for aspect in &aspects {
        for positive in [true, false] {
            for c in 0..spec.cues_per_slot {
                vocab.insert(cue_token(aspect, positive, c));
            }
        }
        for word in aspect.split('-') {
            vocab.insert(word.to_string());
        }
    }
    vocab.insert(".".into());

    let embeddings = vocab
        .into_iter()
        .map(|token| {
            let mut v: Vec<f64> =
                (0..spec.embed_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
            for x in &mut v {
                *x *= spec.embed_scale / norm;
            }
            (token, v)
        })
        .collect();

    Ok(SynthCorpus { records, embeddings, aspects })
}
