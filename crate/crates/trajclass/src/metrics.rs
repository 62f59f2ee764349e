//! Classification metrics: confusion matrix, macro-averaged precision /
//! recall / F1, and the multiclass Matthews correlation coefficient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label index {label} outside the {classes}-class matrix")]
    UnknownLabel { label: u32, classes: usize },
    #[error("true and predicted label counts differ: {true_len} vs {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("metrics need at least one sample and one class")]
    Empty,
}

/// Square count matrix: rows are true classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    k: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(
        y_true: &[u32],
        y_pred: &[u32],
        n_classes: usize,
    ) -> Result<ConfusionMatrix, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch {
                true_len: y_true.len(),
                pred_len: y_pred.len(),
            });
        }
        if y_true.is_empty() || n_classes == 0 {
            return Err(MetricsError::Empty);
        }
        let mut counts = vec![0u64; n_classes * n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            for label in [t, p] {
                if label as usize >= n_classes {
                    return Err(MetricsError::UnknownLabel { label, classes: n_classes });
                }
            }
            counts[t as usize * n_classes + p as usize] += 1;
        }
        Ok(ConfusionMatrix { counts, k: n_classes })
    }

    pub fn from_counts(rows: &[Vec<u64>]) -> Result<ConfusionMatrix, MetricsError> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(MetricsError::Empty);
        }
        Ok(ConfusionMatrix { counts: rows.concat(), k })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn count(&self, true_class: usize, pred_class: usize) -> u64 {
        self.counts[true_class * self.k + pred_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Samples whose true class is `k` (row sum).
    pub fn true_count(&self, k: usize) -> u64 {
        (0..self.k).map(|j| self.count(k, j)).sum()
    }

    /// Samples predicted as class `k` (column sum).
    pub fn pred_count(&self, k: usize) -> u64 {
        (0..self.k).map(|i| self.count(i, k)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k).map(|i| self.count(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.k).map(|i| self.counts[i * self.k..(i + 1) * self.k].to_vec()).collect()
    }
}

/// Macro-averaged precision, recall, and F1.
///
/// Per-class ratios with zero denominators are taken as 0, as is the F1 of a
/// class whose precision and recall are both 0; every class of the matrix
/// participates in the average.
pub fn macro_precision_recall_f1(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let k = cm.classes();
    let (mut psum, mut rsum, mut fsum) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = cm.count(c, c) as f64;
        let pred = cm.pred_count(c) as f64;
        let actual = cm.true_count(c) as f64;
        let p = if pred > 0.0 { tp / pred } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        psum += p;
        rsum += r;
        fsum += f;
    }
    let kf = k as f64;
    (psum / kf, rsum / kf, fsum / kf)
}

/// Multiclass Matthews correlation coefficient.
///
/// With `c` correct samples, `s` total, and per-class predicted/true counts
/// `p_k` / `t_k`:
///
/// ```text
/// (c*s - sum p_k t_k) / sqrt((s^2 - sum p_k^2) (s^2 - sum t_k^2))
/// ```
///
/// The three dot products are accumulated in 128-bit integers so the result
/// is exact up to the final floating-point division. A zero denominator
/// (all predictions or all references in one class) yields 0.
pub fn mcc_multiclass(cm: &ConfusionMatrix) -> f64 {
    let k = cm.classes();
    let s = cm.total() as i128;
    let c = cm.correct() as i128;
    let mut pt = 0i128;
    let mut pp = 0i128;
    let mut tt = 0i128;
    for idx in 0..k {
        let p = cm.pred_count(idx) as i128;
        let t = cm.true_count(idx) as i128;
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    let num = c * s - pt;
    let d1 = s * s - pp;
    let d2 = s * s - tt;
    if d1 <= 0 || d2 <= 0 {
        return 0.0;
    }
    num as f64 / ((d1 as f64).sqrt() * (d2 as f64).sqrt())
}

/// Convenience wrapper: confusion matrix plus all four scores.
pub fn score_predictions(
    y_true: &[u32],
    y_pred: &[u32],
    n_classes: usize,
) -> Result<(ConfusionMatrix, f64, f64, f64, f64), MetricsError> {
    let cm = ConfusionMatrix::from_labels(y_true, y_pred, n_classes)?;
    let (p, r, f1) = macro_precision_recall_f1(&cm);
    let mcc = mcc_multiclass(&cm);
    Ok((cm, p, r, f1, mcc))
}
