//! Pretrained embedding store: text-format loader plus a deterministic
//! out-of-vocabulary policy. Frozen after the pipeline registers its tokens;
//! training never writes to it.

use crate::error::{Error, Result};
use crate::real::Real;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

/// Half-width of the uniform range OOV vectors draw from.
pub const OOV_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub lines: usize,
    pub loaded: usize,
    pub duplicates: usize,
    pub empty: usize,
}

#[derive(Debug)]
pub struct EmbeddingTable<F> {
    dim: usize,
    vectors: HashMap<String, Vec<F>>,
    oov: BTreeSet<String>,
    vocab_hash: u64,
    report: LoadReport,
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The deterministic vector a token receives when it is missing from the
/// pretrained vocabulary: U(-0.05, 0.05) seeded by a hash of the token.
pub fn oov_vector<F: Real>(token: &str, dim: usize) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token.as_bytes()));
    (0..dim).map(|_| F::from_f64(rng.gen_range(-OOV_SCALE..OOV_SCALE))).collect()
}

impl<F: Real> EmbeddingTable<F> {
    /// Parse a text-format embedding file: one line per token,
    /// `token v1 ... v_dim`, space-separated decimals.
    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut vectors = HashMap::new();
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut report = LoadReport::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            report.lines += 1;
            if line.trim().is_empty() {
                report.empty += 1;
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a first field");
            let values: Vec<F> = parts
                .map(|s| {
                    s.parse::<f64>().map(F::from_f64).map_err(|_| Error::Format {
                        line: lineno + 1,
                        detail: format!("unparseable value {s:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::Format {
                    line: lineno + 1,
                    detail: format!("{} values for token {token:?}, want {dim}", values.len()),
                });
            }
            if vectors.contains_key(token) {
                report.duplicates += 1;
                continue;
            }
            hash = mix_entry(hash, token, &values);
            vectors.insert(token.to_string(), values);
            report.loaded += 1;
        }
        Ok(EmbeddingTable { dim, vectors, oov: BTreeSet::new(), vocab_hash: hash, report })
    }

    /// Build a table directly from (token, vector) pairs; used by the
    /// synthetic generator and tests.
    pub fn from_pairs(dim: usize, pairs: &[(String, Vec<f64>)]) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut hash: u64 = 0xcbf29ce484222325;
        let mut report = LoadReport::default();
        for (token, vals) in pairs {
            if vals.len() != dim {
                return Err(Error::dim(
                    "embedding_pairs",
                    format!("{} values for {token:?}, want {dim}", vals.len()),
                ));
            }
            if vectors.contains_key(token.as_str()) {
                report.duplicates += 1;
                continue;
            }
            let conv: Vec<F> = vals.iter().map(|&v| F::from_f64(v)).collect();
            hash = mix_entry(hash, token, &conv);
            vectors.insert(token.clone(), conv);
            report.loaded += 1;
            report.lines += 1;
        }
        Ok(EmbeddingTable { dim, vectors, oov: BTreeSet::new(), vocab_hash: hash, report })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Hash of the loaded vocabulary (OOV entries excluded: they are
    /// reproducible from token names alone). Checkpoints carry this value.
    pub fn vocab_hash(&self) -> u64 {
        self.vocab_hash
    }

    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    pub fn oov_tokens(&self) -> impl Iterator<Item = &str> {
        self.oov.iter().map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Register `token`, generating its OOV vector if the pretrained
    /// vocabulary lacks it. Lookups after registration are total.
    pub fn ensure(&mut self, token: &str) {
        if !self.vectors.contains_key(token) {
            self.vectors.insert(token.to_string(), oov_vector(token, self.dim));
            self.oov.insert(token.to_string());
        }
    }

    /// Vector for a registered token.
    pub fn vector(&self, token: &str) -> Result<&[F]> {
        self.vectors
            .get(token)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("token {token:?} was never registered")))
    }
}

fn mix_entry<F: Real>(mut hash: u64, token: &str, values: &[F]) -> u64 {
    for &b in token.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash ^= 0xff;
    hash = hash.wrapping_mul(0x100000001b3);
    for v in values {
        for b in v.to_le_bytes_vec() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    hash
}
