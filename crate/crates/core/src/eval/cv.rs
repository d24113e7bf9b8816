use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    class_counts, class_metrics, overall_accuracy, roc_points, stratified_kfold, ClassMetrics, ConfusionMatrix,
    EvalError, Result, RocCurve,
};
use crate::svm::{train_multiclass, FeatureMatrix, SmoParams};

/// Held-out results of one fold. Fold numbers start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub support: usize,
    pub accuracy: f64,
    /// Macro averages over classes; undefined if any class value is.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// Arithmetic means of the fold rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAverages {
    pub support: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Metrics of one class over the pooled out-of-fold predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub support: u64,
    pub metrics: ClassMetrics,
    pub roc: RocCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub id: String,
    pub fold: usize,
    pub truth: usize,
    pub label: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub num_classes: usize,
    pub folds: Vec<FoldReport>,
    pub average: FoldAverages,
    pub pooled: ConfusionMatrix,
    pub pooled_accuracy: f64,
    pub classes: Vec<ClassReport>,
    /// Macro means of the per-class rows: recall, precision, f1.
    pub class_recall: Option<f64>,
    pub class_precision: Option<f64>,
    pub class_f1: Option<f64>,
    pub macro_auc: f64,
    /// Out-of-fold predictions in sample-id order.
    pub predictions: Vec<OutOfFold>,
}

pub fn average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean of the values, or `None` if any is undefined.
pub fn average_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Option<Vec<f64>> = values.iter().copied().collect();
    average(&defined?)
}

impl FoldAverages {
    pub fn from_folds(folds: &[FoldReport]) -> Option<Self> {
        let col = |f: fn(&FoldReport) -> Option<f64>| average_defined(&folds.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            support: average(&folds.iter().map(|f| f.support as f64).collect::<Vec<_>>())?,
            accuracy: average(&folds.iter().map(|f| f.accuracy).collect::<Vec<_>>())?,
            precision: col(|f| f.precision),
            recall: col(|f| f.recall),
            f1: col(|f| f.f1),
        })
    }
}

fn per_class(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.k())
        .map(|c| class_metrics(class_counts(cm, c).expect("class index in range")))
        .collect()
}

fn macro_of(metrics: &[ClassMetrics], f: fn(&ClassMetrics) -> Option<f64>) -> Option<f64> {
    average_defined(&metrics.iter().map(f).collect::<Vec<_>>())
}

/// Stratified `k`-fold cross-validation of the one-vs-rest SVM.
///
/// Samples are put in `ids` order before folding, so the report depends only
/// on the (id, label, features) set, never on input order or thread count.
/// Each fold fits its own standardizer on the training part only.
pub fn run_cv(
    x: &FeatureMatrix,
    labels: &[usize],
    ids: &[String],
    num_classes: usize,
    params: &SmoParams,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    if labels.len() != x.rows() || ids.len() != x.rows() {
        return Err(EvalError::InvalidArgument(format!(
            "{} feature rows, {} labels, {} ids",
            x.rows(),
            labels.len(),
            ids.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(EvalError::LabelOutOfRange { label, k: num_classes });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    if let Some(w) = order.windows(2).find(|w| ids[w[0]] == ids[w[1]]) {
        return Err(EvalError::InvalidArgument(format!("duplicate sample id {:?}", ids[w[0]])));
    }
    let sorted_labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let folds = stratified_kfold(&sorted_labels, k, seed)?;

    let fold_results = folds
        .par_iter()
        .enumerate()
        .map(|(f, held)| {
            let mut in_test = vec![false; order.len()];
            for &p in held {
                in_test[p] = true;
            }
            let train: Vec<usize> = (0..order.len()).filter(|&p| !in_test[p]).map(|p| order[p]).collect();
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = train_multiclass(&x.select(&train), &train_labels, num_classes, params)
                .map_err(|source| EvalError::Training { fold: f + 1, source })?;
            let mut cm = ConfusionMatrix::new(num_classes);
            let mut preds = Vec::with_capacity(held.len());
            for &p in held {
                let i = order[p];
                let pred = model
                    .predict(x.row(i))
                    .map_err(|source| EvalError::Training { fold: f + 1, source })?;
                cm.record(labels[i], pred.label)?;
                preds.push((
                    p,
                    OutOfFold {
                        id: ids[i].clone(),
                        fold: f + 1,
                        truth: labels[i],
                        label: pred.label,
                        scores: pred.scores,
                    },
                ));
            }
            let metrics = per_class(&cm);
            let report = FoldReport {
                fold: f + 1,
                support: held.len(),
                accuracy: overall_accuracy(&cm)?,
                precision: macro_of(&metrics, |m| m.precision),
                recall: macro_of(&metrics, |m| m.sensitivity),
                f1: macro_of(&metrics, |m| m.f1),
                confusion: cm,
            };
            Ok((report, preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pooled = ConfusionMatrix::new(num_classes);
    let mut fold_reports = Vec::with_capacity(k);
    let mut slots: Vec<Option<OutOfFold>> = vec![None; order.len()];
    for (report, preds) in fold_results {
        pooled.merge(&report.confusion)?;
        fold_reports.push(report);
        for (p, oof) in preds {
            slots[p] = Some(oof);
        }
    }
    let predictions: Vec<OutOfFold> = slots.into_iter().map(|s| s.expect("folds cover every sample")).collect();

    let metrics = per_class(&pooled);
    let mut classes = Vec::with_capacity(num_classes);
    for (class, m) in metrics.iter().enumerate() {
        let scores: Vec<f64> = predictions.iter().map(|p| p.scores[class]).collect();
        let truth: Vec<bool> = predictions.iter().map(|p| p.truth == class).collect();
        classes.push(ClassReport {
            class,
            support: pooled.support(class),
            metrics: *m,
            roc: roc_points(&scores, &truth)?,
        });
    }
    let macro_auc = average(&classes.iter().map(|c| c.roc.auc).collect::<Vec<_>>()).ok_or(EvalError::Empty)?;
    Ok(CvReport {
        k,
        seed,
        num_classes,
        average: FoldAverages::from_folds(&fold_reports).ok_or(EvalError::Empty)?,
        folds: fold_reports,
        pooled_accuracy: overall_accuracy(&pooled)?,
        pooled,
        class_recall: macro_of(&metrics, |m| m.sensitivity),
        class_precision: macro_of(&metrics, |m| m.precision),
        class_f1: macro_of(&metrics, |m| m.f1),
        classes,
        macro_auc,
        predictions,
    })
}
