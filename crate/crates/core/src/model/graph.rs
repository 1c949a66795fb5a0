//! Builds the model's computation graph on a gradient tape, one instance at
//! a time. Training binds the parameters once per batch and calls
//! `build_forward` per instance; evaluation uses `predict_instance`.

use super::trace::{ChainTrace, DirectionTrace, Prediction};
use super::{DelaySource, GateMode, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::train::DropoutMasks;

/// Tape handles for one GRU cell.
#[derive(Debug, Clone)]
pub struct TapedGru {
    pub update_x: Var,
    pub update_h: Var,
    pub update_b: Var,
    pub reset_x: Var,
    pub reset_h: Var,
    pub reset_b: Var,
    pub cand_x: Var,
    pub cand_h: Var,
    pub cand_b: Var,
}

#[derive(Debug, Clone)]
pub struct TapedDirection {
    pub state_w: Var,
    pub key_w: Var,
    pub input_w: Var,
    pub delay_w: Var,
    pub prelu_slope: Var,
    pub gru: TapedGru,
}

/// Every parameter, registered as a tape leaf. Mirrors
/// `ModelParams::named()` ordering via `named_vars`.
#[derive(Debug, Clone)]
pub struct TapedParams {
    pub keys: Vec<Var>,
    pub fwd: TapedDirection,
    pub bwd: TapedDirection,
    pub attention_w: Var,
    pub hidden_w: Var,
    pub class_w: Var,
    pub class_slope: Var,
}

impl TapedParams {
    /// (name, tape handle) pairs in the canonical parameter order.
    pub fn named_vars(&self) -> Vec<(String, Var)> {
        let mut out: Vec<(String, Var)> = Vec::new();
        for (j, &k) in self.keys.iter().enumerate() {
            out.push((format!("key.{j}"), k));
        }
        for (prefix, dir) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.push((format!("{prefix}.state_w"), dir.state_w));
            out.push((format!("{prefix}.key_w"), dir.key_w));
            out.push((format!("{prefix}.input_w"), dir.input_w));
            out.push((format!("{prefix}.delay_w"), dir.delay_w));
            out.push((format!("{prefix}.prelu"), dir.prelu_slope));
            out.push((format!("{prefix}.gru.update_x"), dir.gru.update_x));
            out.push((format!("{prefix}.gru.update_h"), dir.gru.update_h));
            out.push((format!("{prefix}.gru.update_b"), dir.gru.update_b));
            out.push((format!("{prefix}.gru.reset_x"), dir.gru.reset_x));
            out.push((format!("{prefix}.gru.reset_h"), dir.gru.reset_h));
            out.push((format!("{prefix}.gru.reset_b"), dir.gru.reset_b));
            out.push((format!("{prefix}.gru.cand_x"), dir.gru.cand_x));
            out.push((format!("{prefix}.gru.cand_h"), dir.gru.cand_h));
            out.push((format!("{prefix}.gru.cand_b"), dir.gru.cand_b));
        }
        out.push(("att.w".into(), self.attention_w));
        out.push(("clf.hidden".into(), self.hidden_w));
        out.push(("clf.class".into(), self.class_w));
        out.push(("clf.prelu".into(), self.class_slope));
        out
    }
}

/// Register every parameter array as a leaf on the tape.
pub fn bind_params<F: Real>(tape: &mut Tape<F>, params: &ModelParams<F>) -> TapedParams {
    let bind_dir = |tape: &mut Tape<F>, d: &super::DirectionParams<F>| TapedDirection {
        state_w: tape.leaf(d.state_w.clone()),
        key_w: tape.leaf(d.key_w.clone()),
        input_w: tape.leaf(d.input_w.clone()),
        delay_w: tape.leaf(d.delay_w.clone()),
        prelu_slope: tape.leaf(d.prelu_slope.clone()),
        gru: TapedGru {
            update_x: tape.leaf(d.gru.update_x.clone()),
            update_h: tape.leaf(d.gru.update_h.clone()),
            update_b: tape.leaf(d.gru.update_b.clone()),
            reset_x: tape.leaf(d.gru.reset_x.clone()),
            reset_h: tape.leaf(d.gru.reset_h.clone()),
            reset_b: tape.leaf(d.gru.reset_b.clone()),
            cand_x: tape.leaf(d.gru.cand_x.clone()),
            cand_h: tape.leaf(d.gru.cand_h.clone()),
            cand_b: tape.leaf(d.gru.cand_b.clone()),
        },
    };
    TapedParams {
        keys: params.keys.iter().map(|k| tape.leaf(k.clone())).collect(),
        fwd: bind_dir(tape, &params.fwd),
        bwd: bind_dir(tape, &params.bwd),
        attention_w: tape.leaf(params.attention_w.clone()),
        hidden_w: tape.leaf(params.hidden_w.clone()),
        class_w: tape.leaf(params.class_w.clone()),
        class_slope: tape.leaf(params.class_slope.clone()),
    }
}

/// One instance with every token resolved to an embedding vector.
#[derive(Debug, Clone)]
pub struct InstanceInput<F> {
    pub tokens: Vec<Vec<F>>,
    pub target: Vec<F>,
    pub aspect: Vec<F>,
}

/// Standard GRU cell: z and r gates, tanh candidate, convex update.
pub fn gru_cell<F: Real>(
    tape: &mut Tape<F>,
    gru: &TapedGru,
    x: Var,
    d_prev: Var,
) -> Result<Var> {
    let zx = tape.affine(gru.update_x, x, Some(gru.update_b))?;
    let zh = tape.affine(gru.update_h, d_prev, None)?;
    let zpre = tape.add(zx, zh)?;
    let z = tape.sigmoid(zpre);

    let rx = tape.affine(gru.reset_x, x, Some(gru.reset_b))?;
    let rh = tape.affine(gru.reset_h, d_prev, None)?;
    let rpre = tape.add(rx, rh)?;
    let r = tape.sigmoid(rpre);

    let rd = tape.mul(r, d_prev)?;
    let cx = tape.affine(gru.cand_x, x, Some(gru.cand_b))?;
    let ch = tape.affine(gru.cand_h, rd, None)?;
    let cpre = tape.add(cx, ch)?;
    let c = tape.tanh(cpre);

    let hidden = tape.value(d_prev).len();
    let ones = tape.leaf_vector(&vec![F::one(); hidden]);
    let keep = tape.sub(ones, z)?;
    let kept = tape.mul(keep, d_prev)?;
    let fresh = tape.mul(z, c)?;
    tape.add(kept, fresh)
}

/// Candidate memory: prelu(state_w·h_prev + key_w·key + input_w·w).
/// Returns (pre-activation, candidate); the pre-activation is kept so
/// gradient checks can steer clear of the rectifier kink.
pub fn candidate_memory<F: Real>(
    tape: &mut Tape<F>,
    dir: &TapedDirection,
    w: Var,
    key: Var,
    h_prev: Var,
) -> Result<(Var, Var)> {
    let a_state = tape.affine(dir.state_w, h_prev, None)?;
    let a_key = tape.affine(dir.key_w, key, None)?;
    let a_input = tape.affine(dir.input_w, w, None)?;
    let partial = tape.add(a_state, a_key)?;
    let pre = tape.add(partial, a_input)?;
    let cand = tape.prelu(pre, dir.prelu_slope)?;
    Ok((pre, cand))
}

/// Scalar update gate. `delay` carries the delay state to probe; `None`
/// reproduces the plain content+location gate.
pub fn update_gate<F: Real>(
    tape: &mut Tape<F>,
    dir: &TapedDirection,
    w: Var,
    key: Var,
    h_prev: Var,
    delay: Option<Var>,
) -> Result<Var> {
    let content = tape.dot(w, h_prev)?;
    let location = tape.dot(w, key)?;
    let mut pre = tape.add(content, location)?;
    if let Some(d) = delay {
        let delayed = tape.dot(dir.delay_w, d)?;
        pre = tape.add(pre, delayed)?;
    }
    Ok(tape.sigmoid(pre))
}

/// Gated update followed by renormalization: normalize(h_prev + g · cand).
/// A degenerate post-update norm propagates as an error, never a clamp.
pub fn memory_step<F: Real>(
    tape: &mut Tape<F>,
    h_prev: Var,
    gate: Var,
    cand: Var,
) -> Result<Var> {
    let update = tape.scalar_mul(gate, cand)?;
    let unnormalized = tape.add(h_prev, update)?;
    tape.l2_normalize(unnormalized)
}

struct PassVars {
    /// [chain][processing step]
    memories: Vec<Vec<Var>>,
    delays: Vec<Vec<Var>>,
    candidates: Vec<Vec<Var>>,
    gates: Vec<Vec<Var>>,
}

impl PassVars {
    fn finals(&self) -> Vec<Var> {
        self.memories.iter().map(|m| *m.last().expect("nonempty pass")).collect()
    }
}

/// Run every chain over the tokens in the given processing order.
fn directional_pass<F: Real>(
    tape: &mut Tape<F>,
    dir: &TapedDirection,
    keys: &[Var],
    tokens: &[Var],
    cfg: &ModelConfig,
    prelu_inputs: &mut Vec<Var>,
) -> Result<PassVars> {
    let n_chains = keys.len();
    let zero_delay = tape.leaf_vector(&vec![F::zero(); cfg.gru_hidden]);
    let mut pass = PassVars {
        memories: vec![Vec::with_capacity(tokens.len()); n_chains],
        delays: vec![Vec::with_capacity(tokens.len()); n_chains],
        candidates: vec![Vec::with_capacity(tokens.len()); n_chains],
        gates: vec![Vec::with_capacity(tokens.len()); n_chains],
    };
    for (j, &key) in keys.iter().enumerate() {
        let mut h_prev = key;
        let mut d_prev = zero_delay;
        for &w in tokens {
            let (pre, cand) = candidate_memory(tape, dir, w, key, h_prev)?;
            prelu_inputs.push(pre);
            let d = match cfg.gate_mode {
                GateMode::Delayed => gru_cell(tape, &dir.gru, cand, d_prev)?,
                GateMode::Entnet => zero_delay,
            };
            let gate_delay = match cfg.gate_mode {
                GateMode::Delayed => Some(match cfg.delay_source {
                    DelaySource::Current => d,
                    DelaySource::Previous => d_prev,
                }),
                GateMode::Entnet => None,
            };
            let g = update_gate(tape, dir, w, key, h_prev, gate_delay)?;
            let h = memory_step(tape, h_prev, g, cand)?;
            pass.memories[j].push(h);
            pass.delays[j].push(d);
            pass.candidates[j].push(cand);
            pass.gates[j].push(g);
            h_prev = h;
            d_prev = d;
        }
    }
    Ok(pass)
}

/// Everything the caller needs from one built forward pass.
pub struct BuiltForward<F> {
    /// Classifier logits (pre-softmax), for the fused loss.
    pub logits: Var,
    /// Class probabilities.
    pub probs: Var,
    /// Attention distribution over chains.
    pub attention: Var,
    /// Weighted summary vector fed to the classifier.
    pub summary: Var,
    /// Pre-activations of every rectifier site, for kink-avoidance in
    /// gradient checks.
    pub prelu_inputs: Vec<Var>,
    pub trace: Option<ChainTrace<F>>,
}

impl<F: Real> BuiltForward<F> {
    pub fn prediction(&self, tape: &Tape<F>) -> Prediction {
        let to64 = |v: Var| tape.value(v).iter().map(|&x| x.to_f64()).collect::<Vec<f64>>();
        Prediction {
            class_probs: to64(self.probs),
            attention: to64(self.attention),
            summary: to64(self.summary),
        }
    }
}

/// Build the full forward graph for one instance. `masks` present means
/// training mode: the input mask multiplies every token (same mask at every
/// step, both directions) and the classifier mask multiplies the rectified
/// hidden layer.
pub fn build_forward<F: Real>(
    tape: &mut Tape<F>,
    tp: &TapedParams,
    cfg: &ModelConfig,
    input: &InstanceInput<F>,
    masks: Option<&DropoutMasks<F>>,
    want_trace: bool,
) -> Result<BuiltForward<F>> {
    let d = cfg.embed_dim;
    if input.tokens.is_empty() {
        return Err(Error::EmptyInput("sentence with no tokens".into()));
    }
    for t in &input.tokens {
        if t.len() != d {
            return Err(Error::dim("forward", format!("token vector of length {}", t.len())));
        }
    }
    if input.target.len() != d || input.aspect.len() != d {
        return Err(Error::dim(
            "forward",
            format!("target/aspect lengths {}/{}", input.target.len(), input.aspect.len()),
        ));
    }
    if let Some(m) = masks {
        if m.input_mask().len() != d || m.classifier_mask().len() != d {
            return Err(Error::dim("forward", "dropout mask length".to_string()));
        }
    }
    if tp.keys.len() != cfg.n_chains {
        return Err(Error::dim(
            "forward",
            format!("{} bound keys for {} chains", tp.keys.len(), cfg.n_chains),
        ));
    }

    // Token leaves, input-masked in plain arithmetic (embeddings are frozen,
    // so the masked token is a constant). The same leaf serves both
    // directions, which is exactly the shared-mask contract.
    let token_leaves: Vec<Var> = input
        .tokens
        .iter()
        .map(|t| match masks {
            Some(m) => {
                let masked: Vec<F> =
                    t.iter().zip(m.input_mask()).map(|(&x, &mk)| x * mk).collect();
                tape.leaf_vector(&masked)
            }
            None => tape.leaf_vector(t),
        })
        .collect();
    let reversed: Vec<Var> = token_leaves.iter().rev().copied().collect();

    let mut prelu_inputs = Vec::new();
    let fwd_pass = directional_pass(tape, &tp.fwd, &tp.keys, &token_leaves, cfg, &mut prelu_inputs)?;
    let bwd_pass = directional_pass(tape, &tp.bwd, &tp.keys, &reversed, cfg, &mut prelu_inputs)?;

    // Per-chain summary: each direction's state after consuming the whole
    // sentence.
    let fwd_finals = fwd_pass.finals();
    let bwd_finals = bwd_pass.finals();
    let summaries: Vec<Var> = fwd_finals
        .iter()
        .zip(&bwd_finals)
        .map(|(&f, &b)| tape.add(f, b))
        .collect::<Result<_>>()?;

    // Attention over chains from the [target; aspect] query.
    let mut ta = Vec::with_capacity(2 * d);
    ta.extend_from_slice(&input.target);
    ta.extend_from_slice(&input.aspect);
    let ta_leaf = tape.leaf_vector(&ta);
    let query = tape.affine(tp.attention_w, ta_leaf, None)?;
    let att_logits_parts: Vec<Var> =
        tp.keys.iter().map(|&k| tape.dot(k, query)).collect::<Result<_>>()?;
    let att_logits = tape.stack(att_logits_parts)?;
    let attention = tape.softmax(att_logits)?;

    let mut summary: Option<Var> = None;
    for (j, &s_j) in summaries.iter().enumerate() {
        let p_j = tape.pick(attention, j)?;
        let term = tape.scalar_mul(p_j, s_j)?;
        summary = Some(match summary {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let summary = summary.expect("at least one chain");

    // Classifier: softmax(class_w · dropout(prelu(hidden_w · u + aspect))).
    let aspect_leaf = tape.leaf_vector(&input.aspect);
    let clf_pre = tape.affine(tp.hidden_w, summary, Some(aspect_leaf))?;
    prelu_inputs.push(clf_pre);
    let clf_act = tape.prelu(clf_pre, tp.class_slope)?;
    let clf_in = match masks {
        Some(m) => {
            let mask_leaf = tape.leaf_vector(m.classifier_mask());
            tape.mul(clf_act, mask_leaf)?
        }
        None => clf_act,
    };
    let logits = tape.affine(tp.class_w, clf_in, None)?;
    let probs = tape.softmax(logits)?;

    let trace = if want_trace {
        Some(build_trace(tape, &fwd_pass, &bwd_pass, &summaries))
    } else {
        None
    };

    Ok(BuiltForward { logits, probs, attention, summary, prelu_inputs, trace })
}

fn build_trace<F: Real>(
    tape: &Tape<F>,
    fwd: &PassVars,
    bwd: &PassVars,
    summaries: &[Var],
) -> ChainTrace<F> {
    let n_chains = fwd.memories.len();
    let m = fwd.memories[0].len();
    let grab = |v: Var| tape.value(v).as_slice().to_vec();

    let trace_dir = |pass: &PassVars, reverse: bool| {
        let mut t = DirectionTrace::with_capacity(n_chains, m);
        for j in 0..n_chains {
            let order: Vec<usize> =
                if reverse { (0..m).rev().collect() } else { (0..m).collect() };
            for &step in &order {
                t.memories[j].push(grab(pass.memories[j][step]));
                t.delays[j].push(grab(pass.delays[j][step]));
                t.candidates[j].push(grab(pass.candidates[j][step]));
                t.gates[j].push(tape.scalar_value(pass.gates[j][step]));
            }
        }
        t
    };

    let fwd_trace = trace_dir(fwd, false);
    let bwd_trace = trace_dir(bwd, true);
    let combined = (0..n_chains)
        .map(|j| {
            (0..m)
                .map(|i| {
                    fwd_trace.memories[j][i]
                        .iter()
                        .zip(&bwd_trace.memories[j][i])
                        .map(|(&a, &b)| a + b)
                        .collect()
                })
                .collect()
        })
        .collect();
    ChainTrace {
        fwd: fwd_trace,
        bwd: bwd_trace,
        combined,
        summaries: summaries.iter().map(|&s| grab(s)).collect(),
    }
}

/// Loss node for one built instance.
pub fn instance_loss<F: Real>(
    tape: &mut Tape<F>,
    built: &BuiltForward<F>,
    gold_class: usize,
) -> Result<Var> {
    tape.cross_entropy(built.logits, gold_class)
}

/// Evaluation-mode forward over a fresh tape.
pub fn predict_instance<F: Real>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    input: &InstanceInput<F>,
    want_trace: bool,
) -> Result<(Prediction, Option<ChainTrace<F>>)> {
    let mut tape = Tape::new();
    let tp = bind_params(&mut tape, params);
    let built = build_forward(&mut tape, &tp, cfg, input, None, want_trace)?;
    Ok((built.prediction(&tape), built.trace))
}
