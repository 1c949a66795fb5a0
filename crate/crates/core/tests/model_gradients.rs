//! Whole-model gradient checks at small sizes, against central finite
//! differences. The heavyweight spec-scale run lives in the acceptance
//! suite; these catch regressions fast.

mod support;

use memchain::model::{DelaySource, GateMode, ModelConfig};
use support::*;

fn check(cfg: &ModelConfig, m: usize, n_instances: usize, dropout: f64, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let params = random_params(cfg, &mut rng);
    let case = draw_clean_case(cfg, &params, m, n_instances, dropout, 0.001, &mut rng, 1e-3);
    max_grad_rel_error(&params, cfg, &case, 0.001, 1e-5)
}

#[test]
fn delayed_mode_gradients_match_finite_differences() {
    let cfg = ModelConfig::small(4, 2, 1);
    let err = check(&cfg, 3, 2, 0.0, 101);
    assert!(err <= 1e-4, "max rel error {err}");
}

#[test]
fn entnet_mode_gradients_match_finite_differences() {
    let mut cfg = ModelConfig::small(4, 2, 1);
    cfg.gate_mode = GateMode::Entnet;
    let err = check(&cfg, 3, 2, 0.0, 103);
    assert!(err <= 1e-4, "max rel error {err}");
}

#[test]
fn previous_delay_source_gradients_match_finite_differences() {
    let mut cfg = ModelConfig::small(4, 2, 1);
    cfg.delay_source = DelaySource::Previous;
    let err = check(&cfg, 3, 2, 0.0, 107);
    assert!(err <= 1e-4, "max rel error {err}");
}

#[test]
fn gradients_with_dropout_masks_match_finite_differences() {
    let cfg = ModelConfig::small(4, 3, 1);
    let err = check(&cfg, 4, 2, 0.25, 109);
    assert!(err <= 1e-4, "max rel error {err}");
}

#[test]
fn directional_params_gradcheck_random_config() {
    // dim 8, 3 chains, m = 5: the per-direction parameters of a scalar
    // readout match finite differences.
    let cfg = ModelConfig::small(8, 3, 1);
    let err = check(&cfg, 5, 1, 0.0, 113);
    assert!(err <= 1e-4, "max rel error {err}");
}
