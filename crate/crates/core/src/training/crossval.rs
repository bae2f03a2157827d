use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::graph::{Graph, Pattern};

use super::fit::{evaluate_samples, fit, prepare_samples};
use super::folds::{kfold_split_with_validation, FoldSplit};
use super::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub best_epoch: usize,
    /// Metrics on the labeled test patterns.
    pub report: MetricsReport,
}

/// Seed for one fold's model, distinct per (repeat, fold).
pub fn fold_seed(seed: u64, repeat: usize, fold: usize, folds: usize) -> u64 {
    seed.wrapping_add((repeat * folds + fold) as u64 + 1)
}

pub fn fold_splits(n: usize, cfg: &TrainConfig) -> Result<Vec<FoldSplit>> {
    kfold_split_with_validation(n, cfg.folds, cfg.repeats, cfg.seed, cfg.validation_fraction)
}

pub fn run_fold(graph: &Graph, patterns: &[Pattern], split: &FoldSplit, cfg: &TrainConfig) -> Result<FoldOutcome> {
    let pick = |idx: &[usize]| idx.iter().map(|&k| patterns[k].clone()).collect::<Vec<_>>();
    let test: Vec<Pattern> = pick(&split.test).into_iter().filter(Pattern::is_labeled).collect();
    if test.is_empty() {
        return Err(Error::NoSupervision(format!(
            "repeat {} fold {} has no labeled test patterns",
            split.repeat, split.fold
        )));
    }
    let fold_cfg = TrainConfig {
        seed: fold_seed(cfg.seed, split.repeat, split.fold, cfg.folds),
        ..cfg.clone()
    };
    let outcome = fit(graph, &pick(&split.train), &pick(&split.validation), &fold_cfg)?;
    let samples = prepare_samples(graph, &test, &fold_cfg)?;
    let eval = evaluate_samples(&outcome.model, &outcome.params, &samples, &fold_cfg)?;
    let labels: Vec<f64> = test.iter().filter_map(|p| p.label).collect();
    let report = MetricsReport::compute(&eval.predictions, &labels, cfg.task, cfg.threshold)?;
    Ok(FoldOutcome {
        repeat: split.repeat,
        fold: split.fold,
        seed: fold_cfg.seed,
        best_epoch: outcome.history.best_epoch,
        report,
    })
}

/// Runs every split on up to `jobs` threads. Results come back in split
/// order regardless of which finished first; failures stay in place.
pub fn cross_validate(
    graph: &Graph,
    patterns: &[Pattern],
    splits: &[FoldSplit],
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<Vec<Result<FoldOutcome>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        splits
            .par_iter()
            .map(|s| run_fold(graph, patterns, s, cfg))
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub count: usize,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MeanStd {
        mean,
        std,
        count: values.len(),
    })
}

/// Mean and spread of every numeric metric present in the reports.
pub fn aggregate(reports: &[MetricsReport]) -> Result<BTreeMap<String, MeanStd>> {
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        if let serde_json::Value::Object(map) = serde_json::to_value(r)? {
            for (key, v) in map {
                if let Some(x) = v.as_f64() {
                    columns.entry(key).or_default().push(x);
                }
            }
        }
    }
    Ok(columns
        .into_iter()
        .filter_map(|(k, v)| mean_std(&v).map(|m| (k, m)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_values() {
        let m = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]).unwrap().std, 0.0);
        assert!(mean_std(&[]).is_none());
    }

    #[test]
    fn fold_seeds_distinct() {
        let mut seeds: Vec<u64> = (0..3).flat_map(|r| (0..5).map(move |f| fold_seed(11, r, f, 5))).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 15);
    }

    #[test]
    fn aggregate_skips_missing_fields() {
        let a = MetricsReport::compute(&[0.2, 0.4], &[0.0, 0.5], crate::model::Task::Regression, 0.5).unwrap();
        let b = MetricsReport::compute(&[0.1, 0.1], &[0.1, 0.3], crate::model::Task::Regression, 0.5).unwrap();
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg["mae"].mean - 0.125).abs() < 1e-12);
        assert!(!agg.contains_key("f1"));
        assert_eq!(agg["count"].mean, 2.0);
    }
}
