use serde::{Deserialize, Serialize};

use crate::domain::InterestLabel;
use crate::error::{Error, Result};

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Indexed by label value: `[uninterested, interested]`.
    pub classes: [ClassMetrics; 2],
    pub auc: Option<f64>,
    /// `[[tn, fp], [fn, tp]]` with class 1 as positive.
    pub confusion: [[usize; 2]; 2],
    /// Set when a 0/0 metric was reported as 0 or AUC was undefined.
    pub notes: Vec<String>,
}

impl ClassificationReport {
    pub fn macro_f1(&self) -> f64 {
        (self.classes[0].f1 + self.classes[1].f1) / 2.0
    }

    pub fn accuracy(&self) -> f64 {
        let c = self.confusion;
        let total = c[0][0] + c[0][1] + c[1][0] + c[1][1];
        if total == 0 {
            0.0
        } else {
            (c[0][0] + c[1][1]) as f64 / total as f64
        }
    }
}

fn ratio(num: usize, den: usize, what: &str, class: usize, notes: &mut Vec<String>) -> f64 {
    if den == 0 {
        notes.push(format!("{what} of class {class} is 0/0, reported as 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 and, when `scores` is given, AUC.
pub fn classification_report(
    y_true: &[InterestLabel],
    y_pred: &[InterestLabel],
    scores: Option<&[f64]>,
) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() || scores.is_some_and(|s| s.len() != y_true.len()) {
        return Err(Error::invalid(format!(
            "length mismatch: {} labels, {} predictions, {} scores",
            y_true.len(),
            y_pred.len(),
            scores.map_or(y_true.len(), <[f64]>::len)
        )));
    }
    if y_true.is_empty() {
        return Err(Error::invalid("classification report of zero samples"));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (t, p) in y_true.iter().zip(y_pred) {
        confusion[t.index()][p.index()] += 1;
    }
    let mut notes = Vec::new();
    let mut classes = [ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 }; 2];
    for (c, slot) in classes.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted, "precision", c, &mut notes);
        let recall = ratio(tp, support, "recall", c, &mut notes);
        *slot = ClassMetrics { precision, recall, f1: f1(precision, recall), support };
    }
    let auc = match scores {
        Some(s) => match auc(y_true, s) {
            Ok(a) => Some(a),
            Err(Error::UndefinedAuc) => {
                notes.push("AUC undefined: single-class ground truth".into());
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(ClassificationReport { classes, auc, confusion, notes })
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn auc(y_true: &[InterestLabel], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::invalid("auc: labels and scores differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("auc: NaN score"));
    }
    let n_pos = y_true.iter().filter(|l| l.is_interested()).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Doubled mid-ranks keep every quantity an integer until the final division.
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u64; // 2 × average 1-based rank
        for &k in &order[i..=j] {
            if y_true[k].is_interested() {
                pos_rank_sum2 += mid2;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u64) as f64)
}
