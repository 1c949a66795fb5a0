//! Corpus ingestion, tokenization, embeddings, instance expansion, and
//! batch sampling.

mod corpus;
mod embeddings;
mod sampler;
mod synth;
mod tokenize;

pub use corpus::{
    aspect_vector, expand_corpus, expand_instances, load_corpus, load_split, register_tokens,
    resolve_instance, CorpusSplits, RawOpinion, SentenceRecord,
};
pub use embeddings::{oov_vector, EmbeddingTable, LoadReport, OOV_SCALE};
pub use sampler::{batches_per_epoch, BalancedSampler};
pub use synth::{synth_generate, SynthCorpus, SynthSpec};
pub use tokenize::{is_target_marker, tokenize};

use serde::{Deserialize, Serialize};

/// The four aspects evaluated throughout.
pub const DEFAULT_ASPECTS: [&str; 4] = ["general", "price", "transit-location", "safety"];

pub fn default_aspects() -> Vec<String> {
    DEFAULT_ASPECTS.iter().map(|s| s.to_string()).collect()
}

/// Three-way label for a (target, aspect) slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    None,
}

impl Polarity {
    pub fn class_index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::None => 2,
        }
    }

    pub fn from_class_index(i: usize) -> Option<Polarity> {
        match i {
            0 => Some(Polarity::Positive),
            1 => Some(Polarity::Negative),
            2 => Some(Polarity::None),
            _ => None,
        }
    }

    /// Parse an annotation string, case-insensitively.
    pub fn parse_annotation(s: &str) -> Option<Polarity> {
        match s.to_lowercase().as_str() {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            "none" => Some(Polarity::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::None => "none",
        }
    }

    pub fn is_detection(self) -> bool {
        self != Polarity::None
    }
}

/// One classification unit: a tokenized sentence, a target marker present in
/// it, one aspect, and the gold label for that slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub sentence_id: i64,
    pub tokens: Vec<String>,
    /// Normalized target marker, e.g. "loc1".
    pub target: String,
    pub aspect: String,
    pub gold: Polarity,
}
