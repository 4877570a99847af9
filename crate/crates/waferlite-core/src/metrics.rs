//! Confusion-matrix metrics: per-class and support-weighted
//! precision/recall/F1 plus accuracy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// C x C counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { classes, cells: vec![0; classes * classes] }
    }

    /// Counts (true, predicted) pairs; any value outside [0, C) is an
    /// index error naming the offending row.
    pub fn from_predictions(preds: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::Dim(format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (row, (&p, &t)) in preds.iter().zip(labels).enumerate() {
            if t >= classes {
                return Err(Error::Label { row, label: t, classes });
            }
            if p >= classes {
                return Err(Error::Label { row, label: p, classes });
            }
            cm.cells[t * classes + p] += 1;
        }
        Ok(cm)
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.cells[true_class * self.classes + predicted]
    }

    pub fn add(&mut self, true_class: usize, predicted: usize, count: u64) {
        self.cells[true_class * self.classes + predicted] += count;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Row sum: number of samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    /// Column sum: number of samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Support-weighted metrics; 0/0 ratios are defined as 0.
pub fn weighted_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Stats("metrics over an empty confusion matrix".into()));
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let mut per_class = Vec::with_capacity(cm.classes());
    let (mut wp, mut wr, mut wf) = (0f64, 0f64, 0f64);
    for c in 0..cm.classes() {
        let tp = cm.get(c, c) as f64;
        let support = cm.support(c);
        let predicted = cm.predicted(c) as f64;
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        wp += support as f64 * precision;
        wr += support as f64 * recall;
        wf += support as f64 * f1;
        per_class.push(ClassMetrics { precision, recall, f1, support });
    }
    let n = total as f64;
    Ok(MetricsReport {
        per_class,
        precision: wp / n,
        recall: wr / n,
        f1: wf / n,
        accuracy: cm.trace() as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = [0usize, 1, 2, 1, 0];
        let cm = ConfusionMatrix::from_predictions(&labels, &labels, 3).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(cm.get(t, p), 0);
                }
            }
        }
        let m = weighted_metrics(&cm).unwrap();
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn empty_inputs() {
        let cm = ConfusionMatrix::from_predictions(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(weighted_metrics(&cm), Err(Error::Stats(_))));
    }

    #[test]
    fn out_of_range_rejected() {
        let err = ConfusionMatrix::from_predictions(&[0, 5], &[0, 1], 3).unwrap_err();
        assert_eq!(err, Error::Label { row: 1, label: 5, classes: 3 });
    }

    #[test]
    fn spec_hand_counted_case() {
        // labels [0,0,1,1,1], preds [0,1,1,1,0]
        let cm = ConfusionMatrix::from_predictions(&[0, 1, 1, 1, 0], &[0, 0, 1, 1, 1], 2).unwrap();
        let m = weighted_metrics(&cm).unwrap();
        let c0 = &m.per_class[0];
        assert!((c0.precision - 0.5).abs() < 1e-12);
        assert!((c0.recall - 0.5).abs() < 1e-12);
        assert!((c0.f1 - 0.5).abs() < 1e-12);
        assert_eq!(c0.support, 2);
        let c1 = &m.per_class[1];
        assert!((c1.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((c1.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(c1.support, 3);
        assert!((m.f1 - 0.6).abs() < 1e-12);
        assert!((m.accuracy - 0.6).abs() < 1e-12);
    }

    #[test]
    fn absent_class_yields_zeros_not_errors() {
        // class 2 never true and never predicted
        let cm = ConfusionMatrix::from_predictions(&[0, 1, 0], &[0, 1, 1], 3).unwrap();
        let m = weighted_metrics(&cm).unwrap();
        assert_eq!(m.per_class[2].precision, 0.0);
        assert_eq!(m.per_class[2].recall, 0.0);
        assert_eq!(m.per_class[2].f1, 0.0);
    }

    #[test]
    fn row_sums_count_labels() {
        let mut rng = crate::rng::Rng::new(5);
        let labels: Vec<usize> = (0..1000).map(|_| rng.below(8)).collect();
        let preds: Vec<usize> = (0..1000).map(|_| rng.below(8)).collect();
        let cm = ConfusionMatrix::from_predictions(&preds, &labels, 8).unwrap();
        for c in 0..8 {
            let count = labels.iter().filter(|&&l| l == c).count() as u64;
            assert_eq!(cm.support(c), count);
        }
        assert_eq!(cm.total(), 1000);
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        let mut rng = crate::rng::Rng::new(6);
        for _ in 0..50 {
            let c = 2 + rng.below(7);
            let n = 1 + rng.below(200);
            let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
            let preds: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
            let cm = ConfusionMatrix::from_predictions(&preds, &labels, c).unwrap();
            let m = weighted_metrics(&cm).unwrap();
            // identity holds exactly in integer form
            let tp_sum: u64 = (0..c).map(|i| cm.get(i, i)).sum();
            assert_eq!(tp_sum, cm.trace());
            assert!((m.recall - m.accuracy).abs() < 1e-12);
        }
    }
}
