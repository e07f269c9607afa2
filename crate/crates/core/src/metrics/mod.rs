//! Accuracy, precision, recall, F1, and plot-ready CSV/SVG emission.

mod plot;

pub use plot::{
    write_confusion_csv, write_confusion_svg, write_histogram_csv, write_histogram_svg,
    write_overlay_csv, write_overlay_svg,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("correct count {correct} exceeds total {total}")]
    CorrectExceedsTotal { correct: u64, total: u64 },
    #[error("total sample count must be >= 1")]
    EmptyTotal,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty payload for {0} output")]
    EmptyPayload(&'static str),
}

/// Accuracy percentage: correct / total * 100, computed as an exact integer
/// ratio before the final division.
pub fn accuracy(correct: u64, total: u64) -> Result<f64, MetricsError> {
    if total == 0 {
        return Err(MetricsError::EmptyTotal);
    }
    if correct > total {
        return Err(MetricsError::CorrectExceedsTotal { correct, total });
    }
    Ok((correct as f64 * 100.0) / total as f64)
}

/// K x K counts; rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(pairs: &[(usize, usize)], classes: usize) -> Result<Self, MetricsError> {
        let mut m = Self::new(classes);
        for &(truth, pred) in pairs {
            m.record(truth, pred)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<(), MetricsError> {
        if truth >= self.classes || pred >= self.classes {
            return Err(MetricsError::ClassOutOfRange {
                index: truth.max(pred),
                classes: self.classes,
            });
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Ground-truth count for a class.
    pub fn row_sum(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    /// Prediction count for a class.
    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }
}

/// Per-class one-vs-rest metrics. `zero_division` flags classes whose
/// precision or recall denominator was 0 (reported as 0 by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub accuracy_pct: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean of per-class F1.
    pub macro_f1: f64,
}

/// Computes precision/recall/F1 per class (one-vs-rest) and macro-F1 from a
/// confusion matrix.
pub fn precision_recall_f1(matrix: &ConfusionMatrix) -> Result<MetricSet, MetricsError> {
    if matrix.classes() == 0 || matrix.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut per_class = Vec::with_capacity(matrix.classes());
    for c in 0..matrix.classes() {
        let tp = matrix.get(c, c);
        let fp = matrix.col_sum(c) - tp;
        let fn_ = matrix.row_sum(c) - tp;
        let mut zero_division = false;
        let precision = if tp + fp == 0 {
            zero_division = true;
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            zero_division = true;
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support: matrix.row_sum(c),
            zero_division,
        });
    }
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    Ok(MetricSet {
        accuracy_pct: accuracy(matrix.trace(), matrix.total())?,
        per_class,
        macro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_site_counts_give_exact_81() {
        assert_eq!(accuracy(4_860_000, 6_000_000).unwrap(), 81.0);
        assert_eq!(accuracy(0, 5).unwrap(), 0.0);
        assert_eq!(accuracy(7, 7).unwrap(), 100.0);
        assert!(accuracy(1, 0).is_err());
        assert!(accuracy(8, 7).is_err());
    }

    #[test]
    fn harmonic_mean_of_equal_precision_recall() {
        // Binary matrix with TP=88, FP=12, FN=12, TN=88.
        let mut m = ConfusionMatrix::new(2);
        for _ in 0..88 {
            m.record(0, 0).unwrap();
            m.record(1, 1).unwrap();
        }
        for _ in 0..12 {
            m.record(0, 1).unwrap();
            m.record(1, 0).unwrap();
        }
        let set = precision_recall_f1(&m).unwrap();
        for c in &set.per_class {
            assert!((c.precision - 0.88).abs() < 1e-12);
            assert!((c.recall - 0.88).abs() < 1e-12);
            assert!((c.f1 - 0.88).abs() < 1e-12);
        }
        assert!((set.macro_f1 - 0.88).abs() < 1e-12);
        assert_eq!(set.accuracy_pct, 88.0);
    }

    #[test]
    fn diagonal_matrix_is_perfect() {
        let mut m = ConfusionMatrix::new(3);
        for c in 0..3 {
            for _ in 0..5 {
                m.record(c, c).unwrap();
            }
        }
        let set = precision_recall_f1(&m).unwrap();
        assert_eq!(set.accuracy_pct, 100.0);
        assert!(set.per_class.iter().all(|c| c.f1 == 1.0));
        assert_eq!(set.macro_f1, 1.0);
    }

    #[test]
    fn f1_is_half_when_p_and_r_are_half() {
        // One class with P = R = 0.5: TP=1, FP=1, FN=1.
        let mut m = ConfusionMatrix::new(2);
        m.record(0, 0).unwrap();
        m.record(0, 1).unwrap();
        m.record(1, 0).unwrap();
        let set = precision_recall_f1(&m).unwrap();
        let c0 = &set.per_class[0];
        assert_eq!(c0.precision, 0.5);
        assert_eq!(c0.recall, 0.5);
        assert_eq!(c0.f1, 0.5);
    }

    #[test]
    fn zero_denominator_classes_are_flagged_zero() {
        // Class 1 never occurs and is never predicted.
        let mut m = ConfusionMatrix::new(2);
        m.record(0, 0).unwrap();
        let set = precision_recall_f1(&m).unwrap();
        let c1 = &set.per_class[1];
        assert!(c1.zero_division);
        assert_eq!((c1.precision, c1.recall, c1.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn micro_accuracy_is_trace_over_total() {
        let m = ConfusionMatrix::from_pairs(&[(0, 0), (1, 0), (1, 1), (2, 2)], 3).unwrap();
        assert_eq!(m.trace(), 3);
        assert_eq!(m.total(), 4);
        let set = precision_recall_f1(&m).unwrap();
        assert_eq!(set.accuracy_pct, 75.0);
    }

    #[test]
    fn out_of_range_class_is_rejected() {
        let mut m = ConfusionMatrix::new(2);
        assert!(matches!(
            m.record(2, 0),
            Err(MetricsError::ClassOutOfRange { .. })
        ));
    }
}
