//! Flag values layered over the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use covsev_core::cnn::FeatureHead;
use covsev_core::imaging::{ClaheParams, PreprocessParams, NETWORK_INPUT_SIDE};
use covsev_core::pipeline::config::Config;
use covsev_core::pipeline::Extractor;
use covsev_core::svm::{Kernel, SmoParams};

use crate::error::CliError;
use crate::{ExtractorArgs, PrepArgs, SvmArgs};

/// Every key a config file may set; each one is also a long flag.
const KEYS: &[&str] = &[
    "c",
    "cache",
    "clahe-grid",
    "clip-factor",
    "data",
    "downsample-side",
    "extractor",
    "features",
    "folds",
    "gamma",
    "head",
    "input",
    "kernel",
    "max-iter",
    "median-radius",
    "model",
    "no-clahe",
    "out",
    "per-class",
    "seed",
    "side",
    "target-size",
    "threads",
    "tol",
    "weights",
];

pub struct Settings {
    cfg: Config,
}

impl Settings {
    /// Loads the config file, if any. Underscores in keys count as dashes;
    /// unknown keys are rejected so typos do not pass silently.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self { cfg: Config::default() });
        };
        let raw = Config::load(path).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut cfg = Config::default();
        for (k, v) in raw.iter() {
            let key = k.replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("{}: unknown key {k:?}", path.display())));
            }
            if cfg.get(&key).is_some() {
                return Err(CliError::Usage(format!("{}: key {k:?} given twice", path.display())));
            }
            cfg.set(key, v);
        }
        Ok(Self { cfg })
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.cfg
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key {key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (or `{key}` in the config file)")))
    }

    /// A boolean switch: set by the flag or by `key = true` in the config.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }

    pub fn preprocess(&self, a: &PrepArgs) -> Result<PreprocessParams, CliError> {
        let side = self.or(a.target_size, "target-size", NETWORK_INPUT_SIDE)?;
        let clahe = if self.switch(a.no_clahe, "no-clahe")? {
            None
        } else {
            let grid = self.get(a.clahe_grid.clone(), "clahe-grid")?;
            let (grid_rows, grid_cols) = match grid {
                Some(g) => parse_grid(&g)?,
                None => (8, 8),
            };
            Some(ClaheParams {
                grid_rows,
                grid_cols,
                clip_factor: self.or(a.clip_factor, "clip-factor", 2.0)?,
            })
        };
        let params = PreprocessParams {
            target_h: side,
            target_w: side,
            median_radius: self.or(a.median_radius, "median-radius", 1)?,
            clahe,
        };
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(params)
    }

    pub fn extractor(&self, a: &ExtractorArgs) -> Result<Extractor, CliError> {
        let kind: String = self.or(a.extractor.clone(), "extractor", "cnn".into())?;
        match kind.as_str() {
            "cnn" => {
                let weights: PathBuf = self.require(a.weights.clone(), "weights")?;
                let head = match self.or(a.head.clone(), "head", "flatten".into())?.as_str() {
                    "flatten" => FeatureHead::Flatten,
                    "gap" => FeatureHead::GlobalAvgPool,
                    other => return Err(CliError::Usage(format!("unknown head {other:?}; use flatten or gap"))),
                };
                Ok(Extractor::cnn_from_file(&weights, head)?)
            }
            "downsample" => Ok(Extractor::RawDownsample {
                side: self.or(a.downsample_side, "downsample-side", 16)?,
            }),
            other => Err(CliError::Usage(format!("unknown extractor {other:?}; use cnn or downsample"))),
        }
    }

    /// SMO parameters; the RBF width defaults to `1 / dim`.
    pub fn smo(&self, a: &SvmArgs, dim: usize) -> Result<SmoParams, CliError> {
        let defaults = SmoParams::default();
        let kernel = match self.or(a.kernel.clone(), "kernel", "linear".into())?.as_str() {
            "linear" => Kernel::Linear,
            "rbf" => match self.get(a.gamma, "gamma")? {
                Some(gamma) => Kernel::Rbf { gamma },
                None => Kernel::rbf_default(dim),
            },
            other => return Err(CliError::Usage(format!("unknown kernel {other:?}; use linear or rbf"))),
        };
        let params = SmoParams {
            c: self.or(a.c, "c", defaults.c)?,
            kernel,
            tol: self.or(a.tol, "tol", defaults.tol)?,
            max_iter: self.or(a.max_iter, "max-iter", defaults.max_iter)?,
            ..defaults
        };
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(params)
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("CLAHE grid {s:?} is not of the form RxC"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

/// One-line summaries of the run parameters for report headers.
pub fn describe_preprocess(p: &PreprocessParams) -> String {
    let clahe = match &p.clahe {
        Some(c) => format!("{}x{} clip={}", c.grid_rows, c.grid_cols, c.clip_factor),
        None => "off".into(),
    };
    format!(
        "target={}x{} median_radius={} clahe={clahe}",
        p.target_h, p.target_w, p.median_radius
    )
}

pub fn describe_smo(p: &SmoParams) -> String {
    let kernel = match p.kernel {
        Kernel::Linear => "linear".to_string(),
        Kernel::Rbf { gamma } => format!("rbf gamma={gamma}"),
    };
    format!("C={} kernel={kernel} tol={} max_iter={}", p.c, p.tol, p.max_iter)
}
