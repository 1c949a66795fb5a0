//! The bi-directional memory-chain network.
//!
//! A fixed set of externally keyed memory chains track entities through a
//! sentence. Each chain updates per token through a scalar gate whose
//! activation can be delayed by a GRU-carried state; memories are
//! renormalized to unit length after every update so stale content decays.
//! Chain summaries feed a key-addressed attention and a small classifier.

mod archive;
mod graph;
mod trace;

pub use archive::{read_header, read_params, write_params, ArchiveHeader};
pub use graph::{
    bind_params, build_forward, candidate_memory, gru_cell, instance_loss, memory_step,
    predict_instance, update_gate, BuiltForward, InstanceInput, TapedDirection, TapedGru,
    TapedParams,
};
pub use trace::{ChainTrace, DirectionTrace, Prediction};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::DenseArray;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How the update gate is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    /// Content + location + delay terms (the full model).
    Delayed,
    /// Content + location only; no delay recurrence.
    Entnet,
}

impl std::str::FromStr for GateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delayed" => Ok(GateMode::Delayed),
            "entnet" => Ok(GateMode::Entnet),
            other => Err(Error::Config(format!("unknown gate mode {other:?}"))),
        }
    }
}

/// Which delay state the gate dots with: the one produced at this timestep
/// or the previous one. `Current` is the default reading of the dataflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelaySource {
    Current,
    Previous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_chains: usize,
    /// Leading chains whose keys are frozen to target-token embeddings.
    pub n_tied_keys: usize,
    pub n_classes: usize,
    pub gate_mode: GateMode,
    /// GRU state size; must equal `embed_dim` so the delay probe can dot
    /// with the delay state.
    pub gru_hidden: usize,
    pub delay_source: DelaySource,
}

impl ModelConfig {
    /// The published configuration: 300-d embeddings, 6 chains with 2 tied
    /// keys, 3 classes, delayed gating.
    pub fn paper_default() -> Self {
        ModelConfig {
            embed_dim: 300,
            n_chains: 6,
            n_tied_keys: 2,
            n_classes: 3,
            gate_mode: GateMode::Delayed,
            gru_hidden: 300,
            delay_source: DelaySource::Current,
        }
    }

    /// Small-model constructor for tests and synthetic tasks.
    pub fn small(embed_dim: usize, n_chains: usize, n_tied_keys: usize) -> Self {
        ModelConfig {
            embed_dim,
            n_chains,
            n_tied_keys,
            n_classes: 3,
            gate_mode: GateMode::Delayed,
            gru_hidden: embed_dim,
            delay_source: DelaySource::Current,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.n_chains == 0 || self.n_classes == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.n_tied_keys > self.n_chains {
            return Err(Error::Config(format!(
                "n_tied_keys {} exceeds n_chains {}",
                self.n_tied_keys, self.n_chains
            )));
        }
        if self.gru_hidden != self.embed_dim {
            return Err(Error::Config(format!(
                "gru_hidden {} must equal embed_dim {} (the delay probe dots with the delay state)",
                self.gru_hidden, self.embed_dim
            )));
        }
        Ok(())
    }
}

/// Gate weights for one GRU cell: update gate, reset gate, candidate.
#[derive(Debug, Clone)]
pub struct GruParams<F> {
    pub update_x: DenseArray<F>,
    pub update_h: DenseArray<F>,
    pub update_b: DenseArray<F>,
    pub reset_x: DenseArray<F>,
    pub reset_h: DenseArray<F>,
    pub reset_b: DenseArray<F>,
    pub cand_x: DenseArray<F>,
    pub cand_h: DenseArray<F>,
    pub cand_b: DenseArray<F>,
}

/// Per-direction weights: the candidate-memory maps, the delay probe, the
/// delay GRU, and the candidate activation slope.
#[derive(Debug, Clone)]
pub struct DirectionParams<F> {
    /// Applied to the previous memory in the candidate.
    pub state_w: DenseArray<F>,
    /// Applied to the chain key in the candidate.
    pub key_w: DenseArray<F>,
    /// Applied to the input token in the candidate.
    pub input_w: DenseArray<F>,
    /// Dotted with the delay state in the gate.
    pub delay_w: DenseArray<F>,
    pub gru: GruParams<F>,
    pub prelu_slope: DenseArray<F>,
}

/// Every array the model owns. The first `n_tied_keys` keys are frozen to
/// (unit-normalized) target-token embeddings; everything else trains.
#[derive(Debug, Clone)]
pub struct ModelParams<F> {
    pub keys: Vec<DenseArray<F>>,
    pub fwd: DirectionParams<F>,
    pub bwd: DirectionParams<F>,
    /// Attention map over the concatenated [target; aspect] query.
    pub attention_w: DenseArray<F>,
    /// Classifier hidden map.
    pub hidden_w: DenseArray<F>,
    /// Classifier output map, `[n_classes, embed_dim]`.
    pub class_w: DenseArray<F>,
    pub class_slope: DenseArray<F>,
}

impl<F: Real> ModelParams<F> {
    /// All-zero parameters with the shapes the config dictates; the archive
    /// loader fills these in.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        let zero_dir = || DirectionParams {
            state_w: DenseArray::zeros(vec![d, d]),
            key_w: DenseArray::zeros(vec![d, d]),
            input_w: DenseArray::zeros(vec![d, d]),
            delay_w: DenseArray::zeros(vec![d]),
            gru: GruParams {
                update_x: DenseArray::zeros(vec![d, d]),
                update_h: DenseArray::zeros(vec![d, d]),
                update_b: DenseArray::zeros(vec![d]),
                reset_x: DenseArray::zeros(vec![d, d]),
                reset_h: DenseArray::zeros(vec![d, d]),
                reset_b: DenseArray::zeros(vec![d]),
                cand_x: DenseArray::zeros(vec![d, d]),
                cand_h: DenseArray::zeros(vec![d, d]),
                cand_b: DenseArray::zeros(vec![d]),
            },
            prelu_slope: DenseArray::zeros(vec![1]),
        };
        ModelParams {
            keys: (0..cfg.n_chains).map(|_| DenseArray::zeros(vec![d])).collect(),
            fwd: zero_dir(),
            bwd: zero_dir(),
            attention_w: DenseArray::zeros(vec![d, 2 * d]),
            hidden_w: DenseArray::zeros(vec![d, d]),
            class_w: DenseArray::zeros(vec![cfg.n_classes, d]),
            class_slope: DenseArray::zeros(vec![1]),
        }
    }
}

/// Whether a named array receives optimizer updates.
pub fn is_trainable(name: &str, n_tied_keys: usize) -> bool {
    match name.strip_prefix("key.") {
        Some(idx) => idx.parse::<usize>().map(|i| i >= n_tied_keys).unwrap_or(false),
        None => true,
    }
}

impl<F: Real> ModelParams<F> {
    /// Stable (name, array) listing; the archive, the optimizer state, and
    /// gradient extraction all index by this order.
    pub fn named(&self) -> Vec<(String, &DenseArray<F>)> {
        let mut out: Vec<(String, &DenseArray<F>)> = Vec::new();
        for (j, k) in self.keys.iter().enumerate() {
            out.push((format!("key.{j}"), k));
        }
        for (prefix, dir) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.push((format!("{prefix}.state_w"), &dir.state_w));
            out.push((format!("{prefix}.key_w"), &dir.key_w));
            out.push((format!("{prefix}.input_w"), &dir.input_w));
            out.push((format!("{prefix}.delay_w"), &dir.delay_w));
            out.push((format!("{prefix}.prelu"), &dir.prelu_slope));
            out.push((format!("{prefix}.gru.update_x"), &dir.gru.update_x));
            out.push((format!("{prefix}.gru.update_h"), &dir.gru.update_h));
            out.push((format!("{prefix}.gru.update_b"), &dir.gru.update_b));
            out.push((format!("{prefix}.gru.reset_x"), &dir.gru.reset_x));
            out.push((format!("{prefix}.gru.reset_h"), &dir.gru.reset_h));
            out.push((format!("{prefix}.gru.reset_b"), &dir.gru.reset_b));
            out.push((format!("{prefix}.gru.cand_x"), &dir.gru.cand_x));
            out.push((format!("{prefix}.gru.cand_h"), &dir.gru.cand_h));
            out.push((format!("{prefix}.gru.cand_b"), &dir.gru.cand_b));
        }
        out.push(("att.w".into(), &self.attention_w));
        out.push(("clf.hidden".into(), &self.hidden_w));
        out.push(("clf.class".into(), &self.class_w));
        out.push(("clf.prelu".into(), &self.class_slope));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut DenseArray<F>)> {
        let mut out: Vec<(String, &mut DenseArray<F>)> = Vec::new();
        for (j, k) in self.keys.iter_mut().enumerate() {
            out.push((format!("key.{j}"), k));
        }
        for (prefix, dir) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            out.push((format!("{prefix}.state_w"), &mut dir.state_w));
            out.push((format!("{prefix}.key_w"), &mut dir.key_w));
            out.push((format!("{prefix}.input_w"), &mut dir.input_w));
            out.push((format!("{prefix}.delay_w"), &mut dir.delay_w));
            out.push((format!("{prefix}.prelu"), &mut dir.prelu_slope));
            out.push((format!("{prefix}.gru.update_x"), &mut dir.gru.update_x));
            out.push((format!("{prefix}.gru.update_h"), &mut dir.gru.update_h));
            out.push((format!("{prefix}.gru.update_b"), &mut dir.gru.update_b));
            out.push((format!("{prefix}.gru.reset_x"), &mut dir.gru.reset_x));
            out.push((format!("{prefix}.gru.reset_h"), &mut dir.gru.reset_h));
            out.push((format!("{prefix}.gru.reset_b"), &mut dir.gru.reset_b));
            out.push((format!("{prefix}.gru.cand_x"), &mut dir.gru.cand_x));
            out.push((format!("{prefix}.gru.cand_h"), &mut dir.gru.cand_h));
            out.push((format!("{prefix}.gru.cand_b"), &mut dir.gru.cand_b));
        }
        out.push(("att.w".into(), &mut self.attention_w));
        out.push(("clf.hidden".into(), &mut self.hidden_w));
        out.push(("clf.class".into(), &mut self.class_w));
        out.push(("clf.prelu".into(), &mut self.class_slope));
        out
    }

    /// Total trainable coordinate count under the given tying.
    pub fn n_trainable(&self, n_tied_keys: usize) -> usize {
        self.named()
            .iter()
            .filter(|(n, _)| is_trainable(n, n_tied_keys))
            .map(|(_, a)| a.len())
            .sum()
    }
}

fn glorot<F: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseArray<F> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<F> =
        (0..rows * cols).map(|_| F::from_f64(rng.gen_range(-bound..bound))).collect();
    DenseArray::matrix(rows, cols, data).expect("glorot shape")
}

fn glorot_vec<F: Real>(dim: usize, rng: &mut impl Rng) -> DenseArray<F> {
    let bound = (6.0 / (dim + 1) as f64).sqrt();
    let data: Vec<F> = (0..dim).map(|_| F::from_f64(rng.gen_range(-bound..bound))).collect();
    DenseArray::vector(data).expect("glorot vector")
}

fn unit_normalize<F: Real>(v: &mut DenseArray<F>) {
    let norm = v.iter().map(|&x| x * x).sum::<F>().sqrt();
    for x in v.as_mut_slice() {
        *x = *x / norm;
    }
}

fn init_direction<F: Real>(d: usize, rng: &mut impl Rng) -> DirectionParams<F> {
    DirectionParams {
        state_w: glorot(d, d, rng),
        key_w: glorot(d, d, rng),
        input_w: glorot(d, d, rng),
        delay_w: glorot_vec(d, rng),
        gru: GruParams {
            update_x: glorot(d, d, rng),
            update_h: glorot(d, d, rng),
            update_b: DenseArray::zeros(vec![d]),
            reset_x: glorot(d, d, rng),
            reset_h: glorot(d, d, rng),
            reset_b: DenseArray::zeros(vec![d]),
            cand_x: glorot(d, d, rng),
            cand_h: glorot(d, d, rng),
            cand_b: DenseArray::zeros(vec![d]),
        },
        prelu_slope: DenseArray::scalar(F::from_f64(0.25)),
    }
}

/// Initialize parameters. `tied_key_vectors` are the raw target-token
/// embeddings, one per tied chain; they are unit-normalized here and frozen
/// afterwards. Free keys draw from the matrix scheme and are normalized once.
pub fn init_params<F: Real>(
    cfg: &ModelConfig,
    tied_key_vectors: &[Vec<F>],
    rng: &mut impl Rng,
) -> Result<ModelParams<F>> {
    cfg.validate()?;
    if tied_key_vectors.len() != cfg.n_tied_keys {
        return Err(Error::Config(format!(
            "{} tied key vectors supplied for n_tied_keys {}",
            tied_key_vectors.len(),
            cfg.n_tied_keys
        )));
    }
    let d = cfg.embed_dim;
    let mut keys = Vec::with_capacity(cfg.n_chains);
    for v in tied_key_vectors {
        if v.len() != d {
            return Err(Error::dim("init_params", format!("tied key of length {}", v.len())));
        }
        let mut k = DenseArray::vector(v.clone())?;
        let norm = k.iter().map(|&x| (x * x).to_f64()).sum::<f64>().sqrt();
        if norm <= crate::tape::EPS_NORM {
            return Err(Error::DegenerateNorm {
                op: "init_params(tied key)",
                norm,
                eps: crate::tape::EPS_NORM,
            });
        }
        unit_normalize(&mut k);
        keys.push(k);
    }
    let fwd = init_direction(d, rng);
    let bwd = init_direction(d, rng);
    let attention_w = glorot(d, 2 * d, rng);
    let hidden_w = glorot(d, d, rng);
    let class_w = glorot(cfg.n_classes, d, rng);
    for _ in cfg.n_tied_keys..cfg.n_chains {
        let mut k = glorot_vec(d, rng);
        unit_normalize(&mut k);
        keys.push(k);
    }
    Ok(ModelParams {
        keys,
        fwd,
        bwd,
        attention_w,
        hidden_w,
        class_w,
        class_slope: DenseArray::scalar(F::from_f64(0.25)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::small(8, 3, 1);
        assert!(cfg.validate().is_ok());
        cfg.n_tied_keys = 4;
        assert!(cfg.validate().is_err());
        let mut cfg2 = ModelConfig::small(8, 3, 1);
        cfg2.gru_hidden = 4;
        assert!(cfg2.validate().is_err());
    }

    #[test]
    fn init_shapes_and_key_norms() {
        let cfg = ModelConfig::small(8, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tied = vec![vec![3.0f64; 8]];
        let p = init_params(&cfg, &tied, &mut rng).unwrap();
        assert_eq!(p.keys.len(), 3);
        for k in &p.keys {
            let norm: f64 = k.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        assert_eq!(p.attention_w.shape(), &[8, 16]);
        assert_eq!(p.class_w.shape(), &[3, 8]);
        assert_eq!(p.named().len(), 3 + 2 * 14 + 4);
    }

    #[test]
    fn trainability_by_name() {
        assert!(!is_trainable("key.0", 2));
        assert!(!is_trainable("key.1", 2));
        assert!(is_trainable("key.2", 2));
        assert!(is_trainable("fwd.gru.cand_x", 2));
        assert!(is_trainable("clf.class", 2));
    }

    #[test]
    fn init_is_seed_deterministic_across_precision_streams() {
        let cfg = ModelConfig::small(4, 2, 1);
        let tied = vec![vec![1.0f64, 2.0, 3.0, 4.0]];
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = init_params::<f64>(&cfg, &tied, &mut r1).unwrap();
        let b = init_params::<f64>(&cfg, &tied, &mut r2).unwrap();
        for ((_, x), (_, y)) in a.named().iter().zip(b.named().iter()) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }
}
