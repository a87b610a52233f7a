//! Agreement and ranking metrics.

use serde::Serialize;

use crate::error::{Error, Result};

/// 2x2 confusion counts for binary classification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Confusion {
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual.iter()) {
            match (p, a) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e), with the p_e = 1 degenerate
/// case mapped to 0.
pub fn cohen_kappa(confusion: &Confusion) -> f64 {
    let total = confusion.total() as f64;
    assert!(total > 0.0, "empty confusion matrix");
    let po = confusion.accuracy();
    let pred_pos = (confusion.tp + confusion.fp) as f64 / total;
    let actual_pos = (confusion.tp + confusion.fn_) as f64 / total;
    let pe = pred_pos * actual_pos + (1.0 - pred_pos) * (1.0 - actual_pos);
    if (1.0 - pe).abs() < 1e-15 {
        return 0.0;
    }
    (po - pe) / (1.0 - pe)
}

/// ROC curve by sweeping thresholds over the unique scores descending,
/// grouping ties; AUC by the trapezoid rule (equal to the normalized
/// Mann-Whitney U statistic).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<(Vec<(f64, f64)>, f64)> {
    assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Dataset("roc needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![(0.0, 0.0)];
    let mut auc = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_fpr = 0.0;
    let mut prev_tpr = 0.0;
    let mut i = 0;
    while i < order.len() {
        // Consume a tie group.
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        points.push((fpr, tpr));
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    Ok((points, auc))
}
