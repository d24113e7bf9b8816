use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::store::{read_store, read_store_header, FeatureStore, StoreRow, StoreWriter};
use super::{io_err, DatasetManifest, PipelineError, Result};
use crate::cnn::{extract_features, gray_to_tensor, to_input_tensor, ConvNet, FeatureHead, WeightStore};
use crate::imaging::{preprocess, read_image, GrayImage, PreprocessParams};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "COVSEV_THREADS";

/// Images handed to the worker pool per batch; results are appended to the
/// store in manifest order after each batch.
const BATCH: usize = 32;

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn worker_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Turns a preprocessed image into a feature vector.
#[derive(Debug, Clone)]
pub enum Extractor {
    /// A convolutional base loaded from a VGGW file.
    Cnn {
        net: ConvNet,
        head: FeatureHead,
        /// SHA-256 of the weight file, hex.
        weights_sha256: String,
    },
    /// Area-average downsample to `side`x`side`, scaled to [0, 1]. A cheap
    /// stand-in for the CNN.
    RawDownsample { side: usize },
}

impl Extractor {
    pub fn cnn_from_file(path: &Path, head: FeatureHead) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let store = WeightStore::from_bytes(&bytes)?;
        Ok(Self::Cnn {
            net: ConvNet::from_store(&store)?,
            head,
            weights_sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }

    /// Stable text identifying the extractor, part of the cache fingerprint.
    pub fn describe(&self) -> String {
        match self {
            Extractor::Cnn {
                net,
                head,
                weights_sha256,
            } => format!(
                "cnn layers={} head={head:?} weights_sha256={weights_sha256}",
                net.layers().len()
            ),
            Extractor::RawDownsample { side } => format!("area_downsample side={side}"),
        }
    }

    /// Feature length for images of `h`x`w` pixels.
    pub fn dim(&self, h: usize, w: usize) -> usize {
        match self {
            Extractor::Cnn { net, head, .. } => match head {
                FeatureHead::Flatten => net.output_channels() * (h >> net.pool_count()) * (w >> net.pool_count()),
                FeatureHead::GlobalAvgPool => net.output_channels(),
            },
            Extractor::RawDownsample { side } => side * side,
        }
    }

    pub fn embed(&self, img: &GrayImage) -> Result<Vec<f32>> {
        match self {
            Extractor::Cnn { net, head, .. } => {
                let v = if net.is_vgg16() && *head == FeatureHead::Flatten {
                    extract_features(net, &to_input_tensor(img)?)?
                } else {
                    net.extract(&gray_to_tensor(img), *head)?
                };
                Ok(v.0)
            }
            Extractor::RawDownsample { side } => area_average(img, *side),
        }
    }
}

/// Mean of each cell of a `side`x`side` partition; cell `r` spans rows
/// `[r h / side, (r + 1) h / side)`, likewise for columns.
fn area_average(img: &GrayImage, side: usize) -> Result<Vec<f32>> {
    let (h, w) = img.dims();
    if side == 0 || side > h || side > w {
        return Err(PipelineError::InvalidArgument(format!(
            "cannot downsample {h}x{w} to {side}x{side}"
        )));
    }
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        let (y0, y1) = (r * h / side, (r + 1) * h / side);
        for c in 0..side {
            let (x0, x1) = (c * w / side, (c + 1) * w / side);
            let sum: u64 = (y0..y1).map(|y| img.row(y)[x0..x1].iter().map(|&v| v as u64).sum::<u64>()).sum();
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            out.push((sum as f64 / (255.0 * n)) as f32);
        }
    }
    Ok(out)
}

/// SHA-256 over the preprocessing parameters, the extractor description and
/// the manifest's (id, label) list.
pub fn fingerprint(params: &PreprocessParams, extractor: &Extractor, manifest: &DatasetManifest) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fstr-fingerprint 1\n");
    let clahe = match &params.clahe {
        Some(c) => format!(
            "grid={}x{} clip_bits={:016x}",
            c.grid_rows,
            c.grid_cols,
            c.clip_factor.to_bits()
        ),
        None => "off".into(),
    };
    h.update(
        format!(
            "preprocess target={}x{} median_radius={} clahe={clahe}\n",
            params.target_h, params.target_w, params.median_radius
        )
        .as_bytes(),
    );
    h.update(format!("extractor {}\n", extractor.describe()).as_bytes());
    for e in &manifest.entries {
        h.update(format!("sample {} {}\n", e.id, e.class.label()).as_bytes());
    }
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub id: String,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub store: FeatureStore,
    pub failures: Vec<Failure>,
    /// True when the cache already matched and nothing was computed.
    pub cache_hit: bool,
}

fn embed_file(path: &Path, params: &PreprocessParams, extractor: &Extractor) -> Result<Vec<f32>> {
    let img = read_image(path)?;
    extractor.embed(&preprocess(&img, params)?)
}

/// Preprocesses and embeds every manifest image into the store at `cache`.
///
/// If `cache` already holds a store with the same fingerprint it is
/// returned untouched. Otherwise images are processed in parallel on
/// `threads` workers (default: [`worker_threads`], then all cores) and
/// written in manifest order to a temporary file that replaces `cache`
/// on success. Per-image failures are collected; the run aborts once more
/// than 10% of the manifest has failed.
pub fn extract_all(
    manifest: &DatasetManifest,
    params: &PreprocessParams,
    extractor: &Extractor,
    cache: &Path,
    threads: Option<usize>,
) -> Result<ExtractOutcome> {
    params.validate()?;
    if manifest.is_empty() {
        return Err(PipelineError::InvalidArgument("manifest is empty".into()));
    }
    let fp = fingerprint(params, extractor, manifest);
    if cache.exists() && read_store_header(cache).is_ok_and(|h| h.fingerprint == fp) {
        if let Ok(store) = read_store(cache) {
            let stored: std::collections::HashSet<&str> = store.rows.iter().map(|r| r.id.as_str()).collect();
            let failures = manifest
                .entries
                .iter()
                .filter(|e| !stored.contains(e.id.as_str()))
                .map(|e| Failure {
                    id: e.id.clone(),
                    path: e.path.clone(),
                    reason: "failed when the cache was built".into(),
                })
                .collect();
            return Ok(ExtractOutcome {
                store,
                failures,
                cache_hit: true,
            });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.or_else(worker_threads).unwrap_or(0))
        .build()
        .map_err(|e| PipelineError::InvalidArgument(format!("worker pool: {e}")))?;
    let dim = extractor.dim(params.target_h, params.target_w);
    if let Some(parent) = cache.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut partial = cache.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let mut writer = StoreWriter::create(&partial, dim, fp)?;
    let mut rows = Vec::with_capacity(manifest.len());
    let mut failures = Vec::new();
    let total = manifest.len();
    let result = (|| {
        for batch in manifest.entries.chunks(BATCH) {
            let out: Vec<Result<Vec<f32>>> =
                pool.install(|| batch.par_iter().map(|e| embed_file(&e.path, params, extractor)).collect());
            for (e, r) in batch.iter().zip(out) {
                match r {
                    Ok(features) => {
                        writer.append(&e.id, e.class.label() as u8, &features)?;
                        rows.push(StoreRow {
                            id: e.id.clone(),
                            label: e.class.label() as u8,
                            features,
                        });
                    }
                    Err(err) => failures.push(Failure {
                        id: e.id.clone(),
                        path: e.path.clone(),
                        reason: err.to_string(),
                    }),
                }
            }
            if failures.len() * 10 > total {
                let first = &failures[0];
                return Err(PipelineError::TooManyFailures {
                    failed: failures.len(),
                    total,
                    first: format!("{}: {}", first.path.display(), first.reason),
                });
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        drop(writer);
        let _ = std::fs::remove_file(&partial);
        return Err(e);
    }
    writer.finish()?;
    std::fs::rename(&partial, cache).map_err(io_err(cache))?;
    Ok(ExtractOutcome {
        store: FeatureStore {
            dim,
            fingerprint: fp,
            rows,
        },
        failures,
        cache_hit: false,
    })
}
