//! Aspect-detection and sentiment metrics over prediction records.

use super::auc::roc_auc;
use super::PredictionRecord;
use crate::data::Polarity;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-aspect detection counts and scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AspectBreakdown {
    pub aspect: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// Binary detection F1; `None` when no gold or predicted detections
    /// exist for the aspect.
    pub f1: Option<f64>,
    /// Detection AUC with score 1 - P(none); `None` when single-class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AspectMetrics {
    /// Fraction of sentences with every (target, aspect) slot detected
    /// correctly.
    pub strict_acc: f64,
    /// Per-slot detection accuracy, for the strict <= slot sanity bound.
    pub slot_acc: f64,
    pub macro_f1: f64,
    pub macro_auc: Option<f64>,
    pub per_aspect: Vec<AspectBreakdown>,
    /// Aspects whose F1 / AUC were undefined and skipped from the macro.
    pub skipped_f1: Vec<String>,
    pub skipped_auc: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentimentMetrics {
    /// Accuracy of the positive-vs-negative decision on gold-detected slots.
    pub acc: f64,
    /// Macro AUC over the two polarity classes; `None` when undefined for
    /// both.
    pub macro_auc: Option<f64>,
    pub skipped_auc: Vec<String>,
}

/// Every record's slot grid must be complete: each (sentence, target) pair
/// carries exactly the full aspect set.
fn check_grid(records: &[PredictionRecord], aspect_set: &[String]) -> Result<()> {
    let mut grid: BTreeMap<(i64, &str), Vec<&str>> = BTreeMap::new();
    for r in records {
        grid.entry((r.sentence_id, r.target.as_str())).or_default().push(r.aspect.as_str());
    }
    for ((sid, target), mut aspects) in grid {
        aspects.sort_unstable();
        let mut want: Vec<&str> = aspect_set.iter().map(String::as_str).collect();
        want.sort_unstable();
        if aspects != want {
            return Err(Error::Integrity(format!(
                "sentence {sid}, target {target}: aspect grid {aspects:?} is incomplete"
            )));
        }
    }
    Ok(())
}

/// Aspect detection metrics: strict accuracy, macro F1 and macro AUC over
/// the aspect set (detection = predicted polarity other than `none`).
pub fn aspect_metrics(
    records: &[PredictionRecord],
    aspect_set: &[String],
) -> Result<AspectMetrics> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records".into()));
    }
    check_grid(records, aspect_set)?;

    let mut per_aspect = Vec::new();
    let mut skipped_f1 = Vec::new();
    let mut skipped_auc = Vec::new();
    let mut f1_sum = 0.0;
    let mut f1_count = 0usize;
    let mut auc_sum = 0.0;
    let mut auc_count = 0usize;

    for aspect in aspect_set {
        let subset: Vec<&PredictionRecord> =
            records.iter().filter(|r| &r.aspect == aspect).collect();
        let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
        let mut scores = Vec::with_capacity(subset.len());
        let mut labels = Vec::with_capacity(subset.len());
        for r in &subset {
            let gold_det = r.gold.is_detection();
            let pred_det = r.predicted.is_detection();
            match (pred_det, gold_det) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
            scores.push(1.0 - r.probs[Polarity::None.class_index()]);
            labels.push(gold_det);
        }
        let f1 = if 2 * tp + fp + fn_ == 0 {
            skipped_f1.push(aspect.clone());
            None
        } else {
            let v = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
            f1_sum += v;
            f1_count += 1;
            Some(v)
        };
        let auc = match roc_auc(&scores, &labels) {
            Ok(v) => {
                auc_sum += v;
                auc_count += 1;
                Some(v)
            }
            Err(Error::UndefinedMetric(_)) => {
                skipped_auc.push(aspect.clone());
                None
            }
            Err(e) => return Err(e),
        };
        per_aspect.push(AspectBreakdown { aspect: aspect.clone(), tp, fp, fn_, tn, f1, auc });
    }

    // Strict accuracy per sentence; slot accuracy per record.
    let mut sentence_ok: BTreeMap<i64, bool> = BTreeMap::new();
    let mut correct_slots = 0usize;
    for r in records {
        let ok = r.predicted.is_detection() == r.gold.is_detection();
        if ok {
            correct_slots += 1;
        }
        let entry = sentence_ok.entry(r.sentence_id).or_insert(true);
        *entry = *entry && ok;
    }
    let strict_acc =
        sentence_ok.values().filter(|&&ok| ok).count() as f64 / sentence_ok.len() as f64;
    let slot_acc = correct_slots as f64 / records.len() as f64;

    Ok(AspectMetrics {
        strict_acc,
        slot_acc,
        macro_f1: if f1_count > 0 { f1_sum / f1_count as f64 } else { 0.0 },
        macro_auc: if auc_count > 0 { Some(auc_sum / auc_count as f64) } else { None },
        per_aspect,
        skipped_f1,
        skipped_auc,
    })
}

/// Sentiment metrics over gold-detected slots only: accuracy of the
/// positive-vs-negative argmax (the `none` logit is excluded) and macro AUC
/// over both polarity classes.
pub fn sentiment_metrics(records: &[PredictionRecord]) -> Result<SentimentMetrics> {
    let subset: Vec<&PredictionRecord> =
        records.iter().filter(|r| r.gold != Polarity::None).collect();
    if subset.is_empty() {
        return Err(Error::UndefinedMetric(
            "sentiment metrics need at least one gold-detected record".into(),
        ));
    }
    let mut correct = 0usize;
    for r in &subset {
        let p_pos = r.probs[Polarity::Positive.class_index()];
        let p_neg = r.probs[Polarity::Negative.class_index()];
        let pred = if p_pos >= p_neg { Polarity::Positive } else { Polarity::Negative };
        if pred == r.gold {
            correct += 1;
        }
    }
    let acc = correct as f64 / subset.len() as f64;

    let mut auc_sum = 0.0;
    let mut auc_count = 0usize;
    let mut skipped = Vec::new();
    for class in [Polarity::Positive, Polarity::Negative] {
        let scores: Vec<f64> =
            subset.iter().map(|r| r.probs[class.class_index()]).collect();
        let labels: Vec<bool> = subset.iter().map(|r| r.gold == class).collect();
        match roc_auc(&scores, &labels) {
            Ok(v) => {
                auc_sum += v;
                auc_count += 1;
            }
            Err(Error::UndefinedMetric(_)) => skipped.push(class.as_str().to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(SentimentMetrics {
        acc,
        macro_auc: if auc_count > 0 { Some(auc_sum / auc_count as f64) } else { None },
        skipped_auc: skipped,
    })
}
