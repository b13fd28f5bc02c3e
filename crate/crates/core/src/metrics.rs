//! Evaluation metrics: accuracy, precision, recall, F-score and AUC.
//!
//! AUC is the normalized Mann-Whitney U statistic computed from average
//! ranks, so tied score pairs receive 0.5 credit.

use alloc::vec::Vec;

use crate::error::{MilError, Result};

/// Per-run metric bundle. `degenerate` is set when precision or recall had
/// an empty denominator and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub degenerate: bool,
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(MilError::UndefinedMetric(alloc::format!(
            "need equal, non-empty scores/labels (got {} / {})",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MilError::NonFinite { op: "metrics" });
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. Errors when either class is absent rather than returning
/// a silent 0.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MilError::UndefinedMetric(alloc::format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tied groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
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

/// Threshold metrics; a score >= threshold predicts positive. Precision and
/// recall are 0 (with the degenerate flag set) when their denominator is 0.
pub fn confusion_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<(f64, f64, f64, f64, bool)> {
    check_inputs(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / scores.len() as f64;
    let mut degenerate = false;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        degenerate = true;
        0.0
    };
    let recall = if tp + fnn > 0 {
        tp as f64 / (tp + fnn) as f64
    } else {
        degenerate = true;
        0.0
    };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((accuracy, precision, recall, f_score, degenerate))
}

/// Full report at the standard 0.5 threshold.
pub fn report(scores: &[f64], labels: &[bool]) -> Result<MetricsReport> {
    let auc = auc(scores, labels)?;
    let (accuracy, precision, recall, f_score, degenerate) =
        confusion_metrics(scores, labels, 0.5)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f_score,
        auc,
        n_pos,
        n_neg: labels.len() - n_pos,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted_rankings() {
        let labels = [true, true, false, false];
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
    }

    #[test]
    fn ties_get_half_credit() {
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(auc(&[0.4, 0.6], &[true, true]).is_err());
    }

    #[test]
    fn all_positive_predictions_half_positive_labels() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, true, false, false];
        let (acc, prec, rec, f, degenerate) = confusion_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!(acc, 0.5);
        assert_eq!(prec, 0.5);
        assert_eq!(rec, 1.0);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert!(!degenerate);
    }

    #[test]
    fn all_correct_gives_ones() {
        let scores = [0.9, 0.1];
        let labels = [true, false];
        let (acc, prec, rec, f, _) = confusion_metrics(&scores, &labels, 0.5).unwrap();
        assert_eq!((acc, prec, rec, f), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_flag_when_no_predicted_positives() {
        let (_, prec, _, _, degenerate) =
            confusion_metrics(&[0.1, 0.2], &[true, false], 0.5).unwrap();
        assert_eq!(prec, 0.0);
        assert!(degenerate);
    }

    #[test]
    fn auc_flip_identity() {
        let scores = [0.3, 0.8, 0.8, 0.1, 0.6];
        let labels = [true, false, true, false, true];
        let flipped: Vec<bool> = labels.iter().map(|&l| !l).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&scores, &flipped).unwrap();
        assert_eq!(a + b, 1.0);
    }
}
