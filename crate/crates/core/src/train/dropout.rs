//! Variational dropout masks: one input mask reused at every timestep of a
//! sentence (both directions) and one classifier mask, both inverted-scaled
//! so evaluation needs no rescaling.

use crate::real::Real;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct DropoutMasks<F> {
    input: Vec<F>,
    classifier: Vec<F>,
}

impl<F: Real> DropoutMasks<F> {
    pub fn input_mask(&self) -> &[F] {
        &self.input
    }

    pub fn classifier_mask(&self) -> &[F] {
        &self.classifier
    }
}

fn draw_mask<F: Real>(dim: usize, rate: f64, rng: &mut impl Rng) -> Vec<F> {
    let keep_scale = F::from_f64(1.0 / (1.0 - rate));
    (0..dim)
        .map(|_| if rng.gen::<f64>() < rate { F::zero() } else { keep_scale })
        .collect()
}

/// Fresh masks for one sentence. Entries are 0 or 1/(1-rate).
pub fn make_masks<F: Real>(dim: usize, rate: f64, rng: &mut impl Rng) -> DropoutMasks<F> {
    debug_assert!((0.0..1.0).contains(&rate));
    DropoutMasks { input: draw_mask(dim, rate, rng), classifier: draw_mask(dim, rate, rng) }
}

/// Evaluation-mode masks: all ones.
pub fn eval_masks<F: Real>(dim: usize) -> DropoutMasks<F> {
    DropoutMasks { input: vec![F::one(); dim], classifier: vec![F::one(); dim] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_is_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = make_masks::<f64>(16, 0.0, &mut rng);
        assert!(m.input_mask().iter().all(|&x| x == 1.0));
        assert!(m.classifier_mask().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn entries_are_zero_or_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = make_masks::<f64>(64, 0.2, &mut rng);
        for &x in m.input_mask() {
            assert!(x == 0.0 || (x - 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_entry_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..1000 {
            let m = make_masks::<f64>(100, 0.2, &mut rng);
            sum += m.input_mask().iter().sum::<f64>();
            count += 100;
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn eval_masks_are_ones() {
        let m = eval_masks::<f32>(8);
        assert!(m.input_mask().iter().all(|&x| x == 1.0));
    }
}
