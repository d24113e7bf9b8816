use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::gram_matrix;
use super::smo::train_with_gram;
use super::{fit_standardizer, BinarySvm, FeatureMatrix, Result, SmoParams, Standardizer, SvmError};

/// One binary SVM per class (that class against the rest), sharing one
/// standardizer, kernel and `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvm {
    pub standardizer: Standardizer,
    /// Indexed by class label.
    pub models: Vec<BinarySvm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// One-vs-rest decision values, indexed by class.
    pub scores: Vec<f64>,
}

impl MulticlassSvm {
    pub fn num_classes(&self) -> usize {
        self.models.len()
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Scores every class on the standardized input; the label is the
    /// arg-max, lowest class index on ties.
    pub fn predict(&self, x: &[f32]) -> Result<Prediction> {
        let z = self.standardizer.transform(x)?;
        let scores: Vec<f64> = self.models.iter().map(|m| m.decision_unchecked(&z)).collect();
        Ok(Prediction {
            label: argmax(&scores),
            scores,
        })
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits the standardizer on `x`, then trains class `c` against the rest for
/// every `c < num_classes`. The kernel matrix is computed once and shared.
pub fn train_multiclass(
    x: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    params: &SmoParams,
) -> Result<MulticlassSvm> {
    params.validate()?;
    if labels.len() != x.rows() {
        return Err(SvmError::DimensionMismatch {
            expected: x.rows(),
            found: labels.len(),
        });
    }
    if num_classes < 2 {
        return Err(SvmError::InvalidArgument("need at least two classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(SvmError::InvalidArgument(format!(
            "label {bad} outside 0..{num_classes}"
        )));
    }
    for class in 0..num_classes {
        if labels.iter().filter(|&&l| l == class).count() < 2 {
            return Err(SvmError::MissingClass(class));
        }
    }
    let standardizer = fit_standardizer(x)?;
    let z = standardizer.transform_matrix(x)?;
    let gram = gram_matrix(&params.kernel, &z);
    let models = (0..num_classes)
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            train_with_gram(&z, &gram, &y, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassSvm {
        standardizer,
        models,
    })
}
