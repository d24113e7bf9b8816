//! Dataset ingestion, feature extraction with an on-disk cache, the
//! synthetic dataset generator and the flat config format used by the CLI.

pub mod config;
mod extract;
pub mod golden;
mod manifest;
mod store;
mod synth;

pub use extract::{extract_all, fingerprint, worker_threads, ExtractOutcome, Extractor, Failure, THREADS_ENV};
pub use manifest::{ingest, DatasetManifest, ManifestEntry};
pub use store::{read_store, read_store_header, FeatureStore, StoreHeader, StoreRow, StoreWriter};
pub use synth::{generate_synthetic, synthetic_image};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnn::CnnError;
use crate::imaging::ImagingError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("dataset at {0} contains no images")]
    EmptyDataset(PathBuf),
    #[error("feature store {path}: {reason}")]
    Store { path: PathBuf, reason: String },
    #[error("{failed} of {total} images failed, above the 10% limit; first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.into();
    move |source| PipelineError::Io { path, source }
}

/// The three diagnostic classes, in label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    NonCovid = 0,
    NonSevere = 1,
    Severe = 2,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::NonCovid, Class::NonSevere, Class::Severe];

    pub fn label(self) -> usize {
        self as usize
    }

    pub fn from_label(label: usize) -> Option<Self> {
        Self::ALL.get(label).copied()
    }

    /// Directory and CSV token.
    pub fn name(self) -> &'static str {
        match self {
            Class::NonCovid => "non_covid",
            Class::NonSevere => "non_severe",
            Class::Severe => "severe",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Class {
    type Err = String;

    /// Accepts the class name (case-insensitive, `-` or `_`) or its label.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let token = s.trim().to_ascii_lowercase().replace('-', "_");
        if let Ok(n) = token.parse::<usize>() {
            return Self::from_label(n).ok_or_else(|| format!("label {n} is not 0, 1 or 2"));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name() == token)
            .ok_or_else(|| format!("unknown class {s:?} (expected non_covid, non_severe or severe)"))
    }
}
