//! Classification metrics, ROC analysis and stratified cross-validation.

mod cv;
mod folds;
mod metrics;
pub mod report;
mod roc;

pub use cv::{average, average_defined, run_cv, ClassReport, CvReport, FoldAverages, FoldReport, OutOfFold};
pub use folds::stratified_kfold;
pub use metrics::{class_counts, class_metrics, confusion_matrix, overall_accuracy, ClassCounts, ClassMetrics, ConfusionMatrix};
pub use roc::{roc_points, RocCurve};

use thiserror::Error;

use crate::svm::SvmError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("label {label} outside 0..{k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("class {class} has {count} samples, fewer than the {k} folds")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("samples from at least two classes are required")]
    SingleClass,
    #[error("no samples to evaluate")]
    Empty,
    #[error("fold {fold}: {source}")]
    Training {
        fold: usize,
        #[source]
        source: SvmError,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;
