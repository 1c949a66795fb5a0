//! ROC AUC as the Mann-Whitney statistic: P(score+ > score-) + P(tie)/2.
//!
//! Computed via tie-averaged ranks in O(n log n); the test suites hold it
//! against the O(n^2) pairwise definition directly.

use crate::error::{Error, Result};

/// AUC over binary labels. Requires at least one positive and one negative.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim(
            "roc_auc",
            format!("{} scores for {} labels", scores.len(), labels.len()),
        ));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "roc_auc needs both classes, got {n_pos} positive / {n_neg} negative"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "roc_auc scores".into() });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Tie-averaged ranks, 1-based.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }

    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// The definition, verbatim: fraction of (pos, neg) pairs ranked
    /// correctly, ties counting half.
    fn pairwise_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_give_half() {
        assert_eq!(roc_auc(&[0.4, 0.4, 0.4, 0.4], &[true, false, true, false]).unwrap(), 0.5);
    }

    #[test]
    fn constructed_case_is_three_quarters() {
        let auc = roc_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            roc_auc(&[0.3, 0.4], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn matches_pairwise_oracle_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(2..=50);
            // Coarse scores so ties actually happen.
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.gen_range(0..10) as f64) / 10.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            labels[0] = true;
            if n > 1 {
                labels[1] = false;
            }
            let got = roc_auc(&scores, &labels).unwrap();
            let want = pairwise_oracle(&scores, &labels);
            assert!((got - want).abs() < 1e-9, "got {got}, oracle {want}");
        }
    }

    #[test]
    fn invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(4..30);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            labels[0] = true;
            labels[1] = false;
            let base = roc_auc(&scores, &labels).unwrap();
            let exp_scores: Vec<f64> = scores.iter().map(|&s| (0.5 * s).exp()).collect();
            let affine_scores: Vec<f64> = scores.iter().map(|&s| 3.0 * s + 11.0).collect();
            assert!((roc_auc(&exp_scores, &labels).unwrap() - base).abs() < 1e-12);
            assert!((roc_auc(&affine_scores, &labels).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn complement_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.gen_range(4..40);
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.gen_range(0..7) as f64) / 7.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let a = roc_auc(&scores, &labels).unwrap();
            let flipped: Vec<bool> = labels.iter().map(|&l| !l).collect();
            let b = roc_auc(&scores, &flipped).unwrap();
            assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
