//! Inference-only VGG-16 convolutional base.
//!
//! Weights come from a VGGW file (see [`weights`]); the network is never
//! trained here. The forward pass stores activations as `f32` and
//! accumulates every convolution dot product in `f64`.

mod conv;
mod network;
pub mod weights;

pub use conv::{conv2d, ConvWeights};
pub use network::{extract_features, ConvNet, FeatureHead, LayerKind, LayerSpec, Padding, VGG16_FEATURE_LEN};
pub use weights::{load_weights, read_weight_file, NamedTensor, WeightStore};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{GrayImage, NETWORK_INPUT_SIDE};

/// Per-channel means (R, G, B) subtracted from the network input.
pub const CHANNEL_MEANS: [f32; 3] = [123.68, 116.779, 103.939];

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("failed to read weights {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a VGGW file (magic {found:?})")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported VGGW version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file truncated while reading {what}")]
    Truncated { what: String },
    #[error("checksum mismatch in tensor {name}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum {
        name: String,
        stored: u32,
        computed: u32,
    },
    #[error("shape error: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, CnnError>;

/// Channel-major `(c, h, w)` float tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(CnnError::Shape(format!(
                "({channels},{height},{width}) tensor needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Flattened activations handed to the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f32>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

/// Replicates the gray channel into (R, G, B) and subtracts [`CHANNEL_MEANS`].
pub fn to_input_tensor(img: &GrayImage) -> Result<Tensor3> {
    if img.dims() != (NETWORK_INPUT_SIDE, NETWORK_INPUT_SIDE) {
        return Err(CnnError::InvalidArgument(format!(
            "network input must be {NETWORK_INPUT_SIDE}x{NETWORK_INPUT_SIDE}, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(gray_to_tensor(img))
}

/// Same as [`to_input_tensor`] without the size check, for networks with a
/// non-standard input size.
pub fn gray_to_tensor(img: &GrayImage) -> Tensor3 {
    let plane = img.data().len();
    let mut data = Vec::with_capacity(3 * plane);
    for mean in CHANNEL_MEANS {
        data.extend(img.data().iter().map(|&v| v as f32 - mean));
    }
    Tensor3 {
        channels: 3,
        height: img.height(),
        width: img.width(),
        data,
    }
}

pub fn relu(t: &Tensor3) -> Tensor3 {
    let mut out = t.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(t: &mut Tensor3) {
    for v in t.data.iter_mut() {
        *v = v.max(0.0);
    }
}

/// Max pooling over `kernel x kernel` windows moved by `stride`. The windows
/// must tile the input exactly.
pub fn maxpool2d(t: &Tensor3, kernel: usize, stride: usize) -> Result<Tensor3> {
    let (c, h, w) = t.shape();
    if kernel == 0 || stride == 0 {
        return Err(CnnError::InvalidArgument("pool kernel and stride must be positive".into()));
    }
    let fits = |len: usize| len >= kernel && (len - kernel).is_multiple_of(stride);
    if !fits(h) || !fits(w) {
        return Err(CnnError::InvalidArgument(format!(
            "{h}x{w} map cannot be pooled by kernel {kernel} stride {stride}"
        )));
    }
    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
    let mut data = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = t.channel(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let row = &plane[(oy * stride + ky) * w..];
                    for kx in 0..kernel {
                        m = m.max(row[ox * stride + kx]);
                    }
                }
                data.push(m);
            }
        }
    }
    Tensor3::new(c, oh, ow, data)
}
