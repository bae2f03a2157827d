//! Classification and regression metrics, plus a 2-D PCA projection.

mod metrics;
mod pca;

use serde::{Deserialize, Serialize};

pub use metrics::{binary_labels, f1_max, mae, pearson, precision_recall_f1, prf_from_counts, Prf};
pub use pca::{pca2, Pca2, POWER_MAX_ITER, POWER_TOL};

use crate::error::Result;
use crate::model::Task;

/// Metrics over one set of scored patterns. Classification fields are
/// `None` for regression tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: usize,
    pub threshold: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f1_max: Option<f64>,
    pub f1_max_threshold: Option<f64>,
    pub mae: f64,
}

impl MetricsReport {
    pub fn compute(predictions: &[f64], targets: &[f64], task: Task, threshold: f64) -> Result<Self> {
        let mae = mae(predictions, targets)?;
        let mut report = MetricsReport {
            count: predictions.len(),
            threshold: None,
            precision: None,
            recall: None,
            f1: None,
            f1_max: None,
            f1_max_threshold: None,
            mae,
        };
        if task == Task::BinaryClassification {
            let labels = binary_labels(targets)?;
            let prf = precision_recall_f1(predictions, &labels, threshold)?;
            report.threshold = Some(threshold);
            report.precision = Some(prf.precision);
            report.recall = Some(prf.recall);
            report.f1 = Some(prf.f1);
            if labels.iter().any(|&l| l) {
                let (best, tau) = f1_max(predictions, &labels)?;
                report.f1_max = Some(best);
                report.f1_max_threshold = Some(tau);
            }
        }
        Ok(report)
    }
}
