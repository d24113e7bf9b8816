use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Result, SvmError};

/// Per-feature z-scoring. Zero-variance features keep a unit scale so they
/// map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(SvmError::DimensionMismatch {
                expected: mean.len(),
                found: std.len(),
            });
        }
        if let Some(s) = std.iter().find(|s| !(**s > 0.0)) {
            return Err(SvmError::InvalidArgument(format!("standard deviation {s} is not positive")));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn transform_f64(&self, x: &[f32]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        Ok(x
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect())
    }

    /// Standardized copy rounded to `f32`, the representation the SVMs train on.
    pub fn transform(&self, x: &[f32]) -> Result<Vec<f32>> {
        Ok(self.transform_f64(x)?.into_iter().map(|v| v as f32).collect())
    }

    pub fn transform_matrix(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.check(x.dim())?;
        let mut data = Vec::with_capacity(x.data().len());
        for row in x.iter_rows() {
            data.extend(self.transform(row)?);
        }
        FeatureMatrix::new(x.rows(), x.dim(), data)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

/// Column means and population standard deviations.
pub fn fit_standardizer(x: &FeatureMatrix) -> Result<Standardizer> {
    if x.rows() < 2 || x.dim() == 0 {
        return Err(SvmError::InvalidArgument(format!(
            "standardizer needs at least two rows and one column, got {}x{}",
            x.rows(),
            x.dim()
        )));
    }
    let n = x.rows() as f64;
    let mut mean = vec![0.0f64; x.dim()];
    for row in x.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; x.dim()];
    for row in x.iter_rows() {
        for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v as f64 - m;
            *s += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Standardizer { mean, std })
}
