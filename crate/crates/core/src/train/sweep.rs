//! Multi-seed experiments: train/evaluate once, and the chain-count
//! sensitivity sweep. Each run is fully determined by its seed; sweep run r
//! uses base_seed + r.

use super::{train_from_scratch, TrainConfig, TrainOutput};
use crate::data::{EmbeddingTable, Instance};
use crate::error::{Error, Result};
use crate::eval::{evaluate_records, predict_records, EvalReport};
use crate::model::ModelConfig;
use crate::real::Real;
use serde::{Deserialize, Serialize};

pub struct ExperimentOutcome<F> {
    pub train: TrainOutput<F>,
    pub test_report: EvalReport,
}

/// Train on (train, val) and score the selected checkpoint on test.
pub fn run_experiment<F: Real>(
    train_set: &[Instance],
    val_set: &[Instance],
    test_set: &[Instance],
    table: &EmbeddingTable<F>,
    aspect_set: &[String],
    tied_targets: &[String],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<ExperimentOutcome<F>> {
    let out = train_from_scratch(
        train_set,
        val_set,
        table,
        aspect_set,
        tied_targets,
        model_cfg,
        train_cfg,
    )?;
    if let Some(why) = &out.diverged {
        return Err(Error::Diverged { epoch: out.log.len(), batch: 0, detail: why.clone() });
    }
    let records = predict_records(&out.params, model_cfg, table, aspect_set, test_set)?;
    let test_report = evaluate_records(&records, aspect_set)?;
    Ok(ExperimentOutcome { train: out, test_report })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_chains: usize,
    pub mean_f1: f64,
    /// Sample standard deviation over runs (0 for a single run).
    pub std_f1: f64,
    pub run_f1: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Sensitivity of test aspect macro-F1 to the number of memory chains.
/// Two tied chains are kept for every n, so n must be at least 2.
#[allow(clippy::too_many_arguments)]
pub fn sweep_chains<F: Real>(
    train_set: &[Instance],
    val_set: &[Instance],
    test_set: &[Instance],
    table: &EmbeddingTable<F>,
    aspect_set: &[String],
    base_model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    n_values: &[usize],
    runs_per_n: usize,
    base_seed: u64,
) -> Result<Vec<SweepPoint>> {
    if runs_per_n == 0 {
        return Err(Error::Config("runs_per_n must be positive".into()));
    }
    if let Some(&bad) = n_values.iter().find(|&&n| n < 2) {
        return Err(Error::Config(format!(
            "sweep requires n >= 2 (two tied target chains are mandatory), got {bad}"
        )));
    }
    let tied_targets = super::default_tied_targets(2);
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let model_cfg = ModelConfig { n_chains: n, n_tied_keys: 2, ..base_model_cfg.clone() };
        let mut run_f1 = Vec::with_capacity(runs_per_n);
        for run in 0..runs_per_n {
            let cfg = TrainConfig { seed: base_seed + run as u64, ..train_cfg.clone() };
            let outcome = run_experiment(
                train_set,
                val_set,
                test_set,
                table,
                aspect_set,
                &tied_targets,
                &model_cfg,
                &cfg,
            )?;
            run_f1.push(outcome.test_report.aspect_macro_f1);
        }
        let (mean_f1, std_f1) = mean_std(&run_f1);
        points.push(SweepPoint { n_chains: n, mean_f1, std_f1, run_f1 });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[1.0, 1.0, 1.0]);
        assert_eq!((m, s), (1.0, 0.0));
        let (m2, s2) = mean_std(&[1.0, 3.0]);
        assert_eq!(m2, 2.0);
        assert!((s2 - 2.0f64.sqrt()).abs() < 1e-12);
        let (_, s1) = mean_std(&[5.0]);
        assert_eq!(s1, 0.0);
    }

    #[test]
    fn sweep_rejects_single_chain() {
        let err = sweep_chains::<f64>(
            &[],
            &[],
            &[],
            &crate::data::EmbeddingTable::from_pairs(2, &[]).unwrap(),
            &crate::data::default_aspects(),
            &ModelConfig::small(2, 2, 2),
            &TrainConfig::default(),
            &[1, 2],
            1,
            0,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
