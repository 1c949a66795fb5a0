//! Shared machinery for integration tests: random instances, a whole-model
//! loss evaluator, and the central-difference gradient oracle.

#![allow(dead_code)]

use memchain::gradcheck::rel_error;
use memchain::model::{
    bind_params, build_forward, instance_loss, is_trainable, InstanceInput, ModelConfig,
    ModelParams,
};
use memchain::tape::Tape;
use memchain::train::{make_masks, penalty_node, DropoutMasks};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct GradCase {
    pub inputs: Vec<InstanceInput<f64>>,
    pub golds: Vec<usize>,
    pub masks: Vec<Option<DropoutMasks<f64>>>,
}

pub fn random_instance(dim: usize, m: usize, rng: &mut ChaCha8Rng) -> InstanceInput<f64> {
    let mut vec = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect() };
    InstanceInput {
        tokens: (0..m).map(|_| vec(dim)).collect(),
        target: vec(dim),
        aspect: vec(dim),
    }
}

pub fn random_params(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let tied: Vec<Vec<f64>> = (0..cfg.n_tied_keys)
        .map(|_| (0..cfg.embed_dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    memchain::model::init_params(cfg, &tied, rng).expect("init")
}

/// Mean cross-entropy over the case's instances plus the classifier penalty.
/// Returns (loss, smallest |prelu pre-activation|) so callers can steer away
/// from the rectifier kink.
pub fn case_loss(
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    case: &GradCase,
    lambda: f64,
    squared: bool,
) -> (f64, f64) {
    let mut tape: Tape<f64> = Tape::new();
    let taped = bind_params(&mut tape, params);
    let mut total = None;
    let mut min_pre = f64::INFINITY;
    for ((input, gold), masks) in case.inputs.iter().zip(&case.golds).zip(&case.masks) {
        let built = build_forward(&mut tape, &taped, cfg, input, masks.as_ref(), false)
            .expect("forward");
        for &pre in &built.prelu_inputs {
            for &v in tape.value(pre).as_slice() {
                min_pre = min_pre.min(v.abs());
            }
        }
        let loss = instance_loss(&mut tape, &built, *gold).expect("loss");
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss).expect("add"),
        });
    }
    let mean = tape.scale(total.expect("nonempty"), 1.0 / case.inputs.len() as f64);
    let pen = penalty_node(&mut tape, taped.class_w, lambda, squared).expect("penalty");
    let obj = tape.add(mean, pen).expect("add");
    (tape.scalar_value(obj), min_pre)
}

/// Analytic gradients of `case_loss` for every trainable parameter.
pub fn case_grads(
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    case: &GradCase,
    lambda: f64,
    squared: bool,
) -> Vec<(String, Vec<f64>)> {
    let mut tape: Tape<f64> = Tape::new();
    let taped = bind_params(&mut tape, params);
    let mut total = None;
    for ((input, gold), masks) in case.inputs.iter().zip(&case.golds).zip(&case.masks) {
        let built = build_forward(&mut tape, &taped, cfg, input, masks.as_ref(), false)
            .expect("forward");
        let loss = instance_loss(&mut tape, &built, *gold).expect("loss");
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss).expect("add"),
        });
    }
    let mean = tape.scale(total.expect("nonempty"), 1.0 / case.inputs.len() as f64);
    let pen = penalty_node(&mut tape, taped.class_w, lambda, squared).expect("penalty");
    let obj = tape.add(mean, pen).expect("add");
    let mut grads = tape.backward(obj).expect("backward");
    taped
        .named_vars()
        .into_iter()
        .filter(|(name, _)| is_trainable(name, cfg.n_tied_keys))
        .map(|(name, var)| (name, grads.take(var)))
        .collect()
}

/// Draw a random case whose rectifier pre-activations stay at least
/// `kink_margin` from zero, so central differences see a smooth function.
pub fn draw_clean_case(
    cfg: &ModelConfig,
    params: &ModelParams<f64>,
    m: usize,
    n_instances: usize,
    dropout_rate: f64,
    lambda: f64,
    rng: &mut ChaCha8Rng,
    kink_margin: f64,
) -> GradCase {
    loop {
        let inputs: Vec<InstanceInput<f64>> =
            (0..n_instances).map(|_| random_instance(cfg.embed_dim, m, rng)).collect();
        let golds: Vec<usize> = (0..n_instances).map(|_| rng.gen_range(0..3)).collect();
        let masks: Vec<Option<DropoutMasks<f64>>> = (0..n_instances)
            .map(|_| {
                if dropout_rate > 0.0 {
                    Some(make_masks(cfg.embed_dim, dropout_rate, rng))
                } else {
                    None
                }
            })
            .collect();
        let case = GradCase { inputs, golds, masks };
        let (loss, min_pre) = case_loss(params, cfg, &case, lambda, false);
        if loss.is_finite() && min_pre >= kink_margin {
            return case;
        }
    }
}

/// Max relative disagreement between analytic and central-difference
/// gradients over every trainable coordinate.
pub fn max_grad_rel_error(
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    case: &GradCase,
    lambda: f64,
    step: f64,
) -> f64 {
    let analytic = case_grads(params, cfg, case, lambda, false);
    let mut worst: f64 = 0.0;
    let mut scratch = params.clone();
    let names: Vec<(String, usize)> = scratch
        .named()
        .iter()
        .filter(|(n, _)| is_trainable(n, cfg.n_tied_keys))
        .map(|(n, a)| (n.clone(), a.len()))
        .collect();
    for ((name, len), (gname, garr)) in names.iter().zip(&analytic) {
        assert_eq!(name, gname);
        for i in 0..*len {
            let orig = read_coord(&scratch, name, i);
            write_coord(&mut scratch, name, i, orig + step);
            let (fp, _) = case_loss(&scratch, cfg, case, lambda, false);
            write_coord(&mut scratch, name, i, orig - step);
            let (fm, _) = case_loss(&scratch, cfg, case, lambda, false);
            write_coord(&mut scratch, name, i, orig);
            let fd = (fp - fm) / (2.0 * step);
            worst = worst.max(rel_error(garr[i], fd, 1e-8));
        }
    }
    worst
}

pub fn read_coord(params: &ModelParams<f64>, name: &str, i: usize) -> f64 {
    params
        .named()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, a)| a.as_slice()[i])
        .expect("named coord")
}

pub fn write_coord(params: &mut ModelParams<f64>, name: &str, i: usize, v: f64) {
    for (n, a) in params.named_mut() {
        if n == name {
            a.as_mut_slice()[i] = v;
            return;
        }
    }
    panic!("no parameter named {name}");
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
