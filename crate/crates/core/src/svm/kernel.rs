use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Result, SvmError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    /// RBF kernel with `gamma = 1 / dim`.
    pub fn rbf_default(dim: usize) -> Self {
        Kernel::Rbf {
            gamma: 1.0 / dim.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(SvmError::InvalidArgument(
                format!("rbf gamma must be positive, got {gamma}"),
            )),
            _ => Ok(()),
        }
    }

    /// Kernel value without the length check.
    #[inline]
    pub(crate) fn apply(&self, x: &[f32], y: &[f32]) -> f64 {
        match *self {
            Kernel::Linear => x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let d = a as f64 - b as f64;
                        d * d
                    })
                    .sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// `dot(x, y)` for the linear kernel, `exp(-gamma * |x - y|^2)` for RBF.
pub fn kernel_eval(kernel: &Kernel, x: &[f32], y: &[f32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(kernel.apply(x, y))
}

/// Full symmetric Gram matrix, row-major `n x n`.
pub fn gram_matrix(kernel: &Kernel, x: &FeatureMatrix) -> Vec<f64> {
    let n = x.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel.apply(x.row(i), x.row(j))).collect())
        .collect();
    let mut gram = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    gram
}
