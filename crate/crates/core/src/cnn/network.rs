use serde::{Deserialize, Serialize};

use super::weights::{VGG16_BLOCKS, VGG16_CHANNELS};
use super::{conv2d, maxpool2d, relu_in_place, CnnError, ConvWeights, FeatureVector, Result, Tensor3, WeightStore};

/// Length of the flattened `(512, 7, 7)` VGG-16 output.
pub const VGG16_FEATURE_LEN: usize = 512 * 7 * 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv,
    Relu,
    MaxPool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    /// Set for convolutions only.
    pub out_channels: Option<usize>,
}

impl LayerSpec {
    fn conv(name: String, out_channels: usize) -> Self {
        Self {
            name,
            kind: LayerKind::Conv,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
            out_channels: Some(out_channels),
        }
    }

    fn relu(name: String) -> Self {
        Self {
            name,
            kind: LayerKind::Relu,
            kernel: 1,
            stride: 1,
            padding: Padding::Valid,
            out_channels: None,
        }
    }

    fn pool(name: String) -> Self {
        Self {
            name,
            kind: LayerKind::MaxPool,
            kernel: 2,
            stride: 2,
            padding: Padding::Valid,
            out_channels: None,
        }
    }
}

/// How the final feature map becomes a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureHead {
    /// Every activation in `(c, h, w)` order.
    #[default]
    Flatten,
    /// One spatial mean per channel.
    GlobalAvgPool,
}

/// A VGG-style stack of blocks: each block is a run of 3x3 convolutions,
/// each followed by ReLU, closed by a 2x2 stride-2 max pool.
#[derive(Debug, Clone)]
pub struct ConvNet {
    layers: Vec<LayerSpec>,
    convs: Vec<ConvWeights>,
}

impl ConvNet {
    /// Builds the network described by tensor names `block{b}_conv{k}_w/_b`.
    pub fn from_store(store: &WeightStore) -> Result<Self> {
        let convs = store.conv_layers()?;
        if convs.is_empty() {
            return Err(CnnError::Shape("weight store holds no convolution layers".into()));
        }
        let mut layers = Vec::new();
        let mut weights = Vec::with_capacity(convs.len());
        let mut current_block: Option<usize> = None;
        for (name, conv) in convs {
            let block = parse_block(&name)?;
            match current_block {
                Some(b) if b == block => {}
                Some(b) if block == b + 1 => layers.push(LayerSpec::pool(format!("block{b}_pool"))),
                None if block == 1 => {}
                _ => {
                    return Err(CnnError::Shape(format!(
                        "layer {name} is out of block order"
                    )))
                }
            }
            current_block = Some(block);
            layers.push(LayerSpec::conv(name.clone(), conv.out_channels()));
            layers.push(LayerSpec::relu(format!("{name}_relu")));
            weights.push(conv);
        }
        layers.push(LayerSpec::pool(format!("block{}_pool", current_block.unwrap())));
        Ok(Self {
            layers,
            convs: weights,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.convs[0].in_channels()
    }

    pub fn output_channels(&self) -> usize {
        self.convs.last().unwrap().out_channels()
    }

    pub fn pool_count(&self) -> usize {
        self.layers.iter().filter(|l| l.kind == LayerKind::MaxPool).count()
    }

    /// True when the layer plan is exactly the VGG-16 convolutional base.
    pub fn is_vgg16(&self) -> bool {
        let channels: Vec<usize> = self.convs.iter().map(ConvWeights::out_channels).collect();
        let mut per_block = Vec::new();
        let mut run = 0;
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv => run += 1,
                LayerKind::MaxPool => {
                    per_block.push(run);
                    run = 0;
                }
                LayerKind::Relu => {}
            }
        }
        channels == VGG16_CHANNELS && per_block == VGG16_BLOCKS
    }

    /// Feature vector length for a square input of side `side`.
    pub fn feature_len(&self, side: usize, head: FeatureHead) -> usize {
        match head {
            FeatureHead::Flatten => {
                let s = side >> self.pool_count();
                self.output_channels() * s * s
            }
            FeatureHead::GlobalAvgPool => self.output_channels(),
        }
    }

    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3> {
        self.forward_traced(input, |_, _| Ok(()))
    }

    /// Runs the stack, calling `inspect` after every layer.
    pub fn forward_traced(
        &self,
        input: &Tensor3,
        mut inspect: impl FnMut(&LayerSpec, &Tensor3) -> Result<()>,
    ) -> Result<Tensor3> {
        let mut convs = self.convs.iter();
        let mut t = input.clone();
        for spec in &self.layers {
            match spec.kind {
                LayerKind::Conv => t = conv2d(&t, convs.next().expect("one weight set per conv layer"))?,
                LayerKind::Relu => relu_in_place(&mut t),
                LayerKind::MaxPool => t = maxpool2d(&t, spec.kernel, spec.stride)?,
            }
            inspect(spec, &t)?;
        }
        Ok(t)
    }

    pub fn extract(&self, input: &Tensor3, head: FeatureHead) -> Result<FeatureVector> {
        let out = self.forward(input)?;
        Ok(apply_head(out, head))
    }
}

fn apply_head(t: Tensor3, head: FeatureHead) -> FeatureVector {
    match head {
        FeatureHead::Flatten => FeatureVector(t.into_data()),
        FeatureHead::GlobalAvgPool => {
            let plane = (t.height() * t.width()) as f64;
            FeatureVector(
                (0..t.channels())
                    .map(|c| (t.channel(c).iter().map(|&v| v as f64).sum::<f64>() / plane) as f32)
                    .collect(),
            )
        }
    }
}

fn parse_block(layer: &str) -> Result<usize> {
    layer
        .strip_prefix("block")
        .and_then(|rest| rest.split_once("_conv"))
        .and_then(|(b, k)| Some((b.parse::<usize>().ok()?, k.parse::<usize>().ok()?)))
        .map(|(b, _)| b)
        .ok_or_else(|| CnnError::Shape(format!("layer name {layer} is not of the form block<b>_conv<k>")))
}

/// Runs the VGG-16 base on a `(3, 224, 224)` input and flattens the final
/// `(512, 7, 7)` map into 25088 features. Shapes are checked after every block.
pub fn extract_features(net: &ConvNet, input: &Tensor3) -> Result<FeatureVector> {
    if !net.is_vgg16() {
        return Err(CnnError::Shape("network is not the VGG-16 convolutional base".into()));
    }
    if input.shape() != (3, 224, 224) {
        return Err(CnnError::Shape(format!(
            "VGG-16 input must be (3,224,224), got {:?}",
            input.shape()
        )));
    }
    const AFTER_POOL: [(usize, usize, usize); 5] =
        [(64, 112, 112), (128, 56, 56), (256, 28, 28), (512, 14, 14), (512, 7, 7)];
    let mut pools = AFTER_POOL.iter();
    let out = net.forward_traced(input, |spec, t| {
        if spec.kind == LayerKind::MaxPool {
            let expected = *pools.next().expect("five pools");
            if t.shape() != expected {
                return Err(CnnError::Shape(format!(
                    "after {} expected {expected:?}, got {:?}",
                    spec.name,
                    t.shape()
                )));
            }
        }
        Ok(())
    })?;
    let features = apply_head(out, FeatureHead::Flatten);
    debug_assert_eq!(features.len(), VGG16_FEATURE_LEN);
    Ok(features)
}
