use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// `k`×`k` counts, rows indexed by true class and columns by prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.k..(truth + 1) * self.k]
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        for label in [truth, pred] {
            if label >= self.k {
                return Err(EvalError::LabelOutOfRange { label, k: self.k });
            }
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Number of samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.row(c).iter().sum()
    }

    /// Element-wise sum; both matrices must have the same class count.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(EvalError::InvalidArgument(format!(
                "cannot merge {}-class and {}-class matrices",
                self.k, other.k
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

pub fn confusion_matrix(truth: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(EvalError::InvalidArgument(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&t, &p) in truth.iter().zip(pred) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// One-vs-rest counts for class `c`.
pub fn class_counts(cm: &ConfusionMatrix, c: usize) -> Result<ClassCounts> {
    if c >= cm.k {
        return Err(EvalError::LabelOutOfRange { label: c, k: cm.k });
    }
    let tp = cm.get(c, c);
    let column: u64 = (0..cm.k).map(|t| cm.get(t, c)).sum();
    let fp = column - tp;
    let fn_ = cm.support(c) - tp;
    Ok(ClassCounts {
        tp,
        fp,
        fn_,
        tn: cm.total() - tp - fp - fn_,
    })
}

/// Per-class metrics; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: ClassCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

impl ClassMetrics {
    pub fn recall(&self) -> Option<f64> {
        self.sensitivity
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn class_metrics(counts: ClassCounts) -> ClassMetrics {
    let ClassCounts { tp, fp, fn_, tn } = counts;
    ClassMetrics {
        counts,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        accuracy: ratio(tp + tn, tp + fn_ + fp + tn),
        precision: ratio(tp, tp + fp),
        f1: ratio(2 * tp, 2 * tp + fn_ + fp),
    }
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    ratio(cm.trace(), cm.total()).ok_or(EvalError::Empty)
}
