//! Evaluation suite: prediction records, aspect/sentiment metrics, and gate
//! heatmap export.

mod auc;
mod heatmap;
mod metrics;

pub use auc::roc_auc;
pub use heatmap::{export_gate_heatmap, write_heatmap_csv, GateCell, HeatmapRow};
pub use metrics::{aspect_metrics, sentiment_metrics, AspectBreakdown, AspectMetrics, SentimentMetrics};

use crate::data::{resolve_instance, EmbeddingTable, Instance, Polarity};
use crate::error::{Error, Result};
use crate::model::{predict_instance, ModelConfig, ModelParams};
use crate::real::Real;
use serde::{Deserialize, Serialize};

/// One scored (sentence, target, aspect) slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: i64,
    pub target: String,
    pub aspect: String,
    pub gold: Polarity,
    pub predicted: Polarity,
    /// Probabilities over [positive, negative, none]; sum to 1.
    pub probs: [f64; 3],
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::Integrity(format!(
                "probabilities {:?} do not sum to 1",
                self.probs
            )));
        }
        Ok(())
    }
}

/// The full report: aspect detection plus sentiment classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub aspect_strict_acc: f64,
    pub aspect_macro_f1: f64,
    pub aspect_macro_auc: Option<f64>,
    pub sentiment_acc: f64,
    pub sentiment_macro_auc: Option<f64>,
    pub per_aspect: Vec<AspectBreakdown>,
    pub skipped_f1: Vec<String>,
    pub skipped_auc: Vec<String>,
    pub sentiment_skipped_auc: Vec<String>,
    pub n_records: usize,
}

/// Run the model over instances in evaluation mode.
pub fn predict_records<F: Real>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    table: &EmbeddingTable<F>,
    aspect_set: &[String],
    instances: &[Instance],
) -> Result<Vec<PredictionRecord>> {
    instances
        .iter()
        .map(|inst| {
            let (input, _) = resolve_instance(inst, table, aspect_set)?;
            let (pred, _) = predict_instance(params, cfg, &input, false)?;
            let predicted = Polarity::from_class_index(pred.predicted_class())
                .expect("class index in range");
            Ok(PredictionRecord {
                sentence_id: inst.sentence_id,
                target: inst.target.clone(),
                aspect: inst.aspect.clone(),
                gold: inst.gold,
                predicted,
                probs: [pred.class_probs[0], pred.class_probs[1], pred.class_probs[2]],
            })
        })
        .collect()
}

/// Metrics over a record set. Sentiment metrics degrade to an error only
/// when no gold-detected record exists; the caller decides whether that is
/// fatal. Here the report requires both metric families.
pub fn evaluate_records(
    records: &[PredictionRecord],
    aspect_set: &[String],
) -> Result<EvalReport> {
    for r in records {
        r.validate()?;
    }
    let aspect = aspect_metrics(records, aspect_set)?;
    let sentiment = sentiment_metrics(records)?;
    Ok(EvalReport {
        aspect_strict_acc: aspect.strict_acc,
        aspect_macro_f1: aspect.macro_f1,
        aspect_macro_auc: aspect.macro_auc,
        sentiment_acc: sentiment.acc,
        sentiment_macro_auc: sentiment.macro_auc,
        per_aspect: aspect.per_aspect,
        skipped_f1: aspect.skipped_f1,
        skipped_auc: aspect.skipped_auc,
        sentiment_skipped_auc: sentiment.skipped_auc,
        n_records: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_aspects;

    fn rec(
        sid: i64,
        target: &str,
        aspect: &str,
        gold: Polarity,
        predicted: Polarity,
        p_none: f64,
    ) -> PredictionRecord {
        let spread = (1.0 - p_none) / 2.0;
        let mut probs = [spread, spread, p_none];
        // Tilt the winning class slightly so argmax agrees with `predicted`.
        match predicted {
            Polarity::Positive => {
                probs[0] += 0.8 * spread.min(p_none);
                probs[2] -= 0.8 * spread.min(p_none);
            }
            Polarity::Negative => {
                probs[1] += 0.8 * spread.min(p_none);
                probs[2] -= 0.8 * spread.min(p_none);
            }
            Polarity::None => {}
        }
        PredictionRecord {
            sentence_id: sid,
            target: target.into(),
            aspect: aspect.into(),
            gold,
            predicted,
            probs,
        }
    }

    /// Complete 1-target grid for one sentence with given gold/pred per aspect.
    fn grid(sid: i64, golds: [Polarity; 4], preds: [Polarity; 4]) -> Vec<PredictionRecord> {
        let aspects = default_aspects();
        (0..4)
            .map(|i| {
                let p_none = if preds[i] == Polarity::None { 0.8 } else { 0.1 };
                rec(sid, "loc1", &aspects[i], golds[i], preds[i], p_none)
            })
            .collect()
    }

    use Polarity::{Negative, None, Positive};

    #[test]
    fn all_correct_is_perfect() {
        let golds = [Positive, None, Negative, None];
        let records = grid(1, golds, golds);
        let m = aspect_metrics(&records, &default_aspects()).unwrap();
        assert_eq!(m.strict_acc, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        let s = sentiment_metrics(&records).unwrap();
        assert_eq!(s.acc, 1.0);
    }

    #[test]
    fn strict_is_sentence_level() {
        // Sentence 1 perfect, sentence 2 has one wrong slot: strict 0.5,
        // slot accuracy 7/8.
        let golds = [Positive, None, Negative, None];
        let mut records = grid(1, golds, golds);
        let mut preds = golds;
        preds[1] = Positive; // false positive detection
        records.extend(grid(2, golds, preds));
        let m = aspect_metrics(&records, &default_aspects()).unwrap();
        assert_eq!(m.strict_acc, 0.5);
        assert!((m.slot_acc - 7.0 / 8.0).abs() < 1e-12);
        assert!(m.strict_acc <= m.slot_acc);
    }

    #[test]
    fn f1_matches_hand_confusion_counts() {
        // Build an 8-record set (two sentences) and hand-count the "general"
        // aspect: sentence 1 gold detected/pred detected (TP), sentence 2
        // gold detected/pred none (FN) -> precision 1, recall 1/2, F1 = 2/3.
        let golds = [Positive, None, None, None];
        let records1 = grid(1, golds, [Positive, None, None, None]);
        let records2 = grid(2, [Negative, None, None, None], [None, None, None, None]);
        let mut records = records1;
        records.extend(records2);
        let m = aspect_metrics(&records, &default_aspects()).unwrap();
        let general = &m.per_aspect[0];
        assert_eq!((general.tp, general.fp, general.fn_, general.tn), (1, 0, 1, 0));
        assert!((general.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // Other aspects have no detections anywhere: skipped from the macro.
        assert_eq!(m.skipped_f1.len(), 3);
        assert!((m.macro_f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_grid_is_integrity_error() {
        let golds = [Positive, None, Negative, None];
        let mut records = grid(1, golds, golds);
        records.pop();
        assert!(matches!(
            aspect_metrics(&records, &default_aspects()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn sentiment_four_record_hand_case() {
        // gold: pos, neg, pos, neg; predicted polarity argmax: pos, pos, pos, neg
        let mk = |sid: i64, gold: Polarity, p_pos: f64| PredictionRecord {
            sentence_id: sid,
            target: "loc1".into(),
            aspect: "general".into(),
            gold,
            predicted: if p_pos >= 0.9 - p_pos { Polarity::Positive } else { Polarity::Negative },
            probs: [p_pos, 0.9 - p_pos, 0.1],
        };
        let records = vec![
            mk(1, Positive, 0.8),
            mk(2, Negative, 0.7),
            mk(3, Positive, 0.6),
            mk(4, Negative, 0.2),
        ];
        let s = sentiment_metrics(&records).unwrap();
        // correct: 1 (pos), wrong: 2, correct: 3, correct: 4 -> 3/4
        assert!((s.acc - 0.75).abs() < 1e-12);
        // AUC positive class: scores 0.8, 0.7, 0.6, 0.2; labels 1,0,1,0 -> 0.75
        // AUC negative class: scores 0.1, 0.2, 0.3, 0.7; labels 0,1,0,1 -> 0.75
        assert!((s.macro_auc.unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sentiment_without_detected_gold_is_undefined() {
        let golds = [None, None, None, None];
        let records = grid(1, golds, golds);
        assert!(matches!(
            sentiment_metrics(&records),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn report_round_trips_as_json() {
        let golds = [Positive, None, Negative, None];
        let records = grid(1, golds, golds);
        let report = evaluate_records(&records, &default_aspects()).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.aspect_macro_f1, report.aspect_macro_f1);
    }
}
