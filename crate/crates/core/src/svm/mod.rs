//! Soft-margin support vector machines trained by sequential minimal
//! optimization, combined one-vs-rest for multi-class problems.

mod io;
mod kernel;
mod multiclass;
mod smo;
mod standardize;

pub use io::{load_model, save_model};
pub use kernel::{gram_matrix, kernel_eval, Kernel};
pub use multiclass::{train_multiclass, MulticlassSvm, Prediction};
pub use smo::{dual_objective, kkt_residuals, smo_solve, smo_train, BinarySvm, SmoParams, SmoSolution};
pub use standardize::{fit_standardizer, Standardizer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("class {0} has fewer than two training examples")]
    MissingClass(usize),
    #[error("SMO did not converge within {iterations} pair updates")]
    NotConverged {
        iterations: usize,
        /// Model built from the last iterate.
        best: Box<BinarySvm>,
    },
    #[error("model file I/O on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an SVMM model file")]
    BadMagic,
    #[error("unsupported SVMM version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated while reading {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SvmError>;

/// Dense row-major `f32` matrix: one sample per row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(SvmError::InvalidArgument(format!(
                "{rows}x{dim} matrix needs {} values, got {}",
                rows * dim,
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(SvmError::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }
}
