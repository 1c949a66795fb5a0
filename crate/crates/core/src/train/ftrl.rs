//! FTRL-Proximal per-coordinate optimizer (McMahan et al. style updates).
//!
//! Per coordinate, given gradient g:
//!   sigma = (sqrt(n + g^2) - sqrt(n)) / alpha
//!   z    += g - sigma * w
//!   n    += g^2
//!   w     = 0                                   if |z| <= l1
//!         = -(z - sign(z) l1) / ((beta + sqrt(n)) / alpha + l2)   otherwise
//!
//! The classifier L2 penalty enters through the loss gradient, so the
//! optimizer-level l1/l2 knobs default to zero.

use crate::error::{Error, Result};
use crate::model::{is_trainable, ModelParams};
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct FtrlConfig {
    pub alpha: f64,
    pub beta: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for FtrlConfig {
    fn default() -> Self {
        FtrlConfig { alpha: 0.05, beta: 1.0, l1: 0.0, l2: 0.0 }
    }
}

#[derive(Debug, Clone)]
struct Slot<F> {
    name: String,
    z: Vec<F>,
    n: Vec<F>,
}

/// Accumulators for every trainable coordinate, aligned with the canonical
/// parameter order.
#[derive(Debug, Clone)]
pub struct FtrlState<F> {
    slots: Vec<Slot<F>>,
}

impl<F: Real> FtrlState<F> {
    pub fn new(params: &ModelParams<F>, n_tied_keys: usize) -> Self {
        let slots = params
            .named()
            .into_iter()
            .filter(|(name, _)| is_trainable(name, n_tied_keys))
            .map(|(name, arr)| Slot {
                name,
                z: vec![F::zero(); arr.len()],
                n: vec![F::zero(); arr.len()],
            })
            .collect();
        FtrlState { slots }
    }

    /// Monotonicity witness for tests: the n accumulators, flattened.
    pub fn n_accumulators(&self) -> Vec<f64> {
        self.slots.iter().flat_map(|s| s.n.iter().map(|&x| x.to_f64())).collect()
    }
}

/// Single-coordinate update, exposed for oracle comparison.
///
/// A zero gradient is an exact no-op: z and n would not move, and skipping
/// the weight recompute keeps coordinates the optimizer never touched at
/// their initialization.
pub fn ftrl_coordinate<F: Real>(w: &mut F, z: &mut F, n: &mut F, g: F, cfg: &FtrlConfig) {
    if g == F::zero() {
        return;
    }
    let alpha = F::from_f64(cfg.alpha);
    let beta = F::from_f64(cfg.beta);
    let l1 = F::from_f64(cfg.l1);
    let l2 = F::from_f64(cfg.l2);
    let n_new = *n + g * g;
    let sigma = (n_new.sqrt() - n.sqrt()) / alpha;
    *z = *z + g - sigma * *w;
    *n = n_new;
    if z.abs() <= l1 {
        *w = F::zero();
    } else {
        let shrunk = *z - z.signum() * l1;
        *w = -shrunk / ((beta + n_new.sqrt()) / alpha + l2);
    }
}

/// Apply one optimizer step to every trainable array. `grads` must carry one
/// (name, buffer) entry per trainable array in state order; a non-finite
/// gradient aborts, naming the parameter.
pub fn ftrl_step<F: Real>(
    params: &mut ModelParams<F>,
    grads: &[(String, Vec<F>)],
    state: &mut FtrlState<F>,
    cfg: &FtrlConfig,
    n_tied_keys: usize,
) -> Result<()> {
    if grads.len() != state.slots.len() {
        return Err(Error::Config(format!(
            "{} gradient buffers for {} optimizer slots",
            grads.len(),
            state.slots.len()
        )));
    }
    for ((gname, g), slot) in grads.iter().zip(&state.slots) {
        if gname != &slot.name {
            return Err(Error::Config(format!(
                "gradient order mismatch: {gname:?} vs slot {:?}",
                slot.name
            )));
        }
        if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: format!("gradient of {gname} (value {bad})") });
        }
    }
    let mut slot_iter = state.slots.iter_mut();
    let mut grad_iter = grads.iter();
    for (name, arr) in params.named_mut() {
        if !is_trainable(&name, n_tied_keys) {
            continue;
        }
        let slot = slot_iter.next().expect("state aligned with trainable params");
        let (_, g) = grad_iter.next().expect("grads aligned with trainable params");
        debug_assert_eq!(slot.name, name);
        if g.len() != arr.len() {
            return Err(Error::dim(
                "ftrl_step",
                format!("gradient of {name} has {} coords, want {}", g.len(), arr.len()),
            ));
        }
        let w = arr.as_mut_slice();
        for i in 0..w.len() {
            ftrl_coordinate(&mut w[i], &mut slot.z[i], &mut slot.n[i], g[i], cfg);
        }
    }
    Ok(())
}
