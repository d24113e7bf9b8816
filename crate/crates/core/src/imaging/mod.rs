//! Grayscale image preprocessing: bilinear resize, median denoising and
//! contrast limited adaptive histogram equalization.
//!
//! Every operation is a pure function over [`GrayImage`] and produces
//! identical bytes for identical inputs, whatever the thread count.

mod clahe;
mod io;
mod median;
mod resize;

pub use clahe::{clahe, equalize_global};
pub use io::{decode_image, read_image, read_pgm, rgb_to_luma, write_pgm};
pub use median::median_filter;
pub use resize::resize_bilinear;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of histogram bins used by the equalizers. Fixed for 8-bit data.
pub const HIST_BINS: usize = 256;

/// Side length of the square network input.
pub const NETWORK_INPUT_SIDE: usize = 224;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// 8-bit grayscale raster stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(ImagingError::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(ImagingError::InvalidArgument(format!(
                "{height}x{width} image needs {} bytes, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Image filled with a single gray value.
    pub fn filled(height: usize, width: usize, value: u8) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds an image by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// 256-bin intensity histogram.
    pub fn histogram(&self) -> [u64; HIST_BINS] {
        let mut hist = [0u64; HIST_BINS];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Clip limit as a multiple of the mean bin count. `f64::INFINITY`
    /// disables clipping.
    pub clip_factor: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            grid_rows: 8,
            grid_cols: 8,
            clip_factor: 2.0,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(ImagingError::InvalidArgument(format!(
                "CLAHE grid must be at least 1x1, got {}x{}",
                self.grid_rows, self.grid_cols
            )));
        }
        // NaN fails this comparison too.
        if !(self.clip_factor > 0.0) {
            return Err(ImagingError::InvalidArgument(format!(
                "clip factor must be positive, got {}",
                self.clip_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub target_h: usize,
    pub target_w: usize,
    pub median_radius: usize,
    /// `None` skips the CLAHE stage.
    pub clahe: Option<ClaheParams>,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            target_h: NETWORK_INPUT_SIDE,
            target_w: NETWORK_INPUT_SIDE,
            median_radius: 1,
            clahe: Some(ClaheParams::default()),
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_h == 0 || self.target_w == 0 {
            return Err(ImagingError::InvalidArgument(
                "target size must be positive".into(),
            ));
        }
        if self.median_radius == 0 {
            return Err(ImagingError::InvalidArgument(
                "median radius must be at least 1".into(),
            ));
        }
        if let Some(c) = &self.clahe {
            c.validate()?;
        }
        Ok(())
    }
}

/// Resize, then median filter, then CLAHE.
pub fn preprocess(img: &GrayImage, params: &PreprocessParams) -> Result<GrayImage> {
    params.validate()?;
    let resized = resize_bilinear(img, params.target_h, params.target_w)?;
    let denoised = median_filter(&resized, params.median_radius)?;
    match &params.clahe {
        Some(c) => clahe(&denoised, c),
        None => Ok(denoised),
    }
}

/// Round-half-up of the non-negative rational `num / den`.
#[inline]
pub(crate) fn round_ratio(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}
