use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from confusion counts; empty denominators give 0.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores to evaluate".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    Ok(())
}

/// Positive prediction means `score >= threshold`.
pub fn precision_recall_f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Prf> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(prf_from_counts(tp, fp, fn_))
}

/// Best F1 over all thresholds and the smallest threshold reaching it.
///
/// F1 only changes at observed scores, so the sweep visits each distinct
/// score (plus one value above the maximum) from the top down, moving a
/// whole tie group across the threshold at once.
pub fn f1_max(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("F1max needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let top = scores[order[0]];
    let mut best = (prf_from_counts(0, 0, positives).f1, top.next_up());
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let tau = scores[order[k]];
        while k < order.len() && scores[order[k]] == tau {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let f1 = prf_from_counts(tp, fp, positives - tp).f1;
        // thresholds descend, so >= keeps the smallest one on ties
        if f1 >= best.0 {
            best = (f1, tau);
        }
    }
    Ok(best)
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no predictions to evaluate".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions but {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let total: f64 = predictions.iter().zip(targets).map(|(p, t)| (t - p).abs()).sum();
    Ok(total / predictions.len() as f64)
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs two equal series of length >= 2 (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("a series has zero variance".into()));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Interprets labels as binary classes, rejecting anything but 0 and 1.
pub fn binary_labels(labels: &[f64]) -> Result<Vec<bool>> {
    labels
        .iter()
        .map(|&l| {
            if l == 1.0 {
                Ok(true)
            } else if l == 0.0 {
                Ok(false)
            } else {
                Err(Error::InvalidArgument(format!("class label {l} is not 0 or 1")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_true_positive() {
        let p = precision_recall_f1(&[0.9], &[true], 0.5).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_thirds_everywhere() {
        // TP=2 (0.9, 0.8), FP=1 (0.7), FN=1 (0.2)
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1];
        let labels = [true, true, false, true, false];
        let p = precision_recall_f1(&scores, &labels, 0.5).unwrap();
        for v in [p.precision, p.recall, p.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nothing_predicted_positive() {
        let p = precision_recall_f1(&[0.1, 0.2], &[true, false], 0.5).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = precision_recall_f1(&[0.5], &[true], 0.5).unwrap();
        assert_eq!(p.f1, 1.0);
    }

    #[test]
    fn f1_max_examples() {
        assert_eq!(f1_max(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), (1.0, 0.8));
        // all three predicted positive at 0.3: P = 2/3, R = 1
        let (f, t) = f1_max(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap();
        assert!((f - 0.8).abs() < 1e-15);
        assert_eq!(t, 0.3);
        assert_eq!(f1_max(&[0.42], &[true]).unwrap(), (1.0, 0.42));
        assert!(matches!(f1_max(&[0.1, 0.2], &[false, false]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn f1_max_tie_group_moves_together() {
        let (f, t) = f1_max(&[0.5, 0.5, 0.1], &[true, false, false]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t, 0.5);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(precision_recall_f1(&[], &[], 0.5).is_err());
        assert!(precision_recall_f1(&[0.1], &[true, false], 0.5).is_err());
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn binary_label_validation() {
        assert_eq!(binary_labels(&[0.0, 1.0]).unwrap(), vec![false, true]);
        assert!(binary_labels(&[0.5]).is_err());
    }
}
