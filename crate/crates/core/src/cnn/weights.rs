//! VGGW weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "VGGW" | version u32 = 1 | tensor_count u32
//! per tensor: name_len u16 | name (UTF-8) | ndim u8 | dims u32 x ndim
//!             | crc32 u32 of payload | payload f32 x prod(dims)
//! ```
//!
//! Tensors appear in network order: `block1_conv1_w`, `block1_conv1_b`, ...,
//! `block5_conv3_b`.

use std::path::Path;

use super::{CnnError, ConvWeights, Result};

pub const MAGIC: &[u8; 4] = b"VGGW";
pub const VERSION: u32 = 1;

/// Output channels of the thirteen VGG-16 convolutions, in order.
pub const VGG16_CHANNELS: [usize; 13] = [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512];
/// Convolutions per VGG-16 block.
pub const VGG16_BLOCKS: [usize; 5] = [2, 2, 3, 3, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(CnnError::Shape(format!(
                "tensor {name} with dims {dims:?} needs {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }

    fn payload_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn crc32(&self) -> u32 {
        crc32fast::hash(&self.payload_bytes())
    }
}

/// Ordered tensors read from (or destined for) a VGGW file. Immutable once
/// loaded; share it behind an `Arc` across threads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore {
    tensors: Vec<NamedTensor>,
}

impl WeightStore {
    pub fn new(tensors: Vec<NamedTensor>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Pairs `<layer>_w` / `<layer>_b` tensors into convolution layers and
    /// checks that channel counts chain from a 3-channel input.
    pub fn conv_layers(&self) -> Result<Vec<(String, ConvWeights)>> {
        if !self.tensors.len().is_multiple_of(2) {
            return Err(CnnError::Shape(format!(
                "expected weight/bias pairs, found {} tensors",
                self.tensors.len()
            )));
        }
        let mut layers = Vec::with_capacity(self.tensors.len() / 2);
        let mut prev_out = 3;
        for pair in self.tensors.chunks_exact(2) {
            let (w, b) = (&pair[0], &pair[1]);
            let layer = w.name.strip_suffix("_w").ok_or_else(|| {
                CnnError::Shape(format!("expected a kernel tensor ending in _w, got {}", w.name))
            })?;
            if b.name != format!("{layer}_b") {
                return Err(CnnError::Shape(format!(
                    "kernel {} must be followed by {layer}_b, got {}",
                    w.name, b.name
                )));
            }
            let &[out_c, in_c, kh, kw] = w.dims.as_slice() else {
                return Err(CnnError::Shape(format!(
                    "kernel {} must be 4-D, has dims {:?}",
                    w.name, w.dims
                )));
            };
            if (kh, kw) != (3, 3) {
                return Err(CnnError::Shape(format!(
                    "kernel {} must be 3x3, is {kh}x{kw}",
                    w.name
                )));
            }
            if in_c != prev_out {
                return Err(CnnError::Shape(format!(
                    "kernel {} expects {in_c} input channels but the previous layer yields {prev_out}",
                    w.name
                )));
            }
            if b.dims != [out_c] {
                return Err(CnnError::Shape(format!(
                    "bias {} must have dims [{out_c}], has {:?}",
                    b.name, b.dims
                )));
            }
            layers.push((
                layer.to_string(),
                ConvWeights::new(out_c, in_c, w.data.clone(), b.data.clone())?,
            ));
            prev_out = out_c;
        }
        Ok(layers)
    }

    /// Checks the exact VGG-16 layout: thirteen convolutions named
    /// `block{b}_conv{k}` with the standard channel plan.
    pub fn validate_vgg16(&self) -> Result<()> {
        let layers = self.conv_layers()?;
        if layers.len() != VGG16_CHANNELS.len() {
            return Err(CnnError::Shape(format!(
                "VGG-16 needs 13 convolution layers, found {}",
                layers.len()
            )));
        }
        let expected_names = VGG16_BLOCKS
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| (1..=n).map(move |k| format!("block{}_conv{k}", b + 1)));
        for (((name, conv), expected), &out_c) in layers.iter().zip(expected_names).zip(&VGG16_CHANNELS) {
            if *name != expected {
                return Err(CnnError::Shape(format!("expected layer {expected}, found {name}")));
            }
            if conv.out_channels() != out_c {
                return Err(CnnError::Shape(format!(
                    "layer {name} should have {out_c} output channels, has {}",
                    conv.out_channels()
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            let payload = t.payload_bytes();
            out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
            out.extend_from_slice(&payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if &magic != MAGIC {
            return Err(CnnError::BadMagic { found: magic });
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(CnnError::UnsupportedVersion(version));
        }
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for index in 0..count {
            let name_len = u16::from_le_bytes(r.take(2, &format!("tensor {index} name length"))?.try_into().unwrap());
            let name = String::from_utf8(r.take(name_len as usize, &format!("tensor {index} name"))?.to_vec())
                .map_err(|_| CnnError::Shape(format!("tensor {index} name is not UTF-8")))?;
            let ndim = r.take(1, &format!("{name} rank"))?[0] as usize;
            let dims = (0..ndim)
                .map(|_| r.u32(&format!("{name} dims")).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let stored = r.u32(&format!("{name} checksum"))?;
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| CnnError::Shape(format!("{name} dims {dims:?} overflow")))?;
            let payload = r.take(count, &format!("{name} payload"))?;
            let computed = crc32fast::hash(payload);
            if computed != stored {
                return Err(CnnError::Checksum {
                    name,
                    stored,
                    computed,
                });
            }
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor { name, dims, data });
        }
        Ok(Self { tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CnnError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CnnError::Truncated { what: what.to_string() }),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Reads any VGGW file, verifying format and checksums but not layout.
pub fn read_weight_file(path: &Path) -> Result<WeightStore> {
    let bytes = std::fs::read(path).map_err(|source| CnnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    WeightStore::from_bytes(&bytes)
}

/// Reads a VGGW file and checks it holds exactly the VGG-16 convolutional base.
pub fn load_weights(path: &Path) -> Result<WeightStore> {
    let store = read_weight_file(path)?;
    store.validate_vgg16()?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// VGG-16 shaped store with cheap deterministic contents.
    pub(crate) fn vgg16_store() -> WeightStore {
        let mut tensors = Vec::new();
        let mut in_c = 3;
        let mut layer = 0;
        for (b, &convs) in VGG16_BLOCKS.iter().enumerate() {
            for k in 1..=convs {
                let out_c = VGG16_CHANNELS[layer];
                let name = format!("block{}_conv{k}", b + 1);
                let n = out_c * in_c * 9;
                tensors.push(
                    NamedTensor::new(
                        format!("{name}_w"),
                        vec![out_c, in_c, 3, 3],
                        (0..n).map(|i| ((i % 7) as f32 - 3.0) * 1e-3).collect(),
                    )
                    .unwrap(),
                );
                tensors.push(NamedTensor::new(format!("{name}_b"), vec![out_c], vec![0.01; out_c]).unwrap());
                in_c = out_c;
                layer += 1;
            }
        }
        WeightStore::new(tensors)
    }

    #[test]
    fn roundtrip_full_store() {
        let store = vgg16_store();
        assert_eq!(store.len(), 26);
        let parsed = WeightStore::from_bytes(&store.to_bytes()).unwrap();
        assert_eq!(parsed, store);
        parsed.validate_vgg16().unwrap();
        assert_eq!(parsed.conv_layers().unwrap().len(), 13);
    }

    #[test]
    fn flipped_byte_names_the_tensor() {
        let store = vgg16_store();
        let mut bytes = store.to_bytes();
        let last = bytes.len() - 10;
        bytes[last] ^= 0x40;
        match WeightStore::from_bytes(&bytes) {
            Err(CnnError::Checksum { name, .. }) => assert_eq!(name, "block5_conv3_b"),
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn single_channel_input_breaks_the_chain() {
        let mut tensors = vgg16_store().tensors().to_vec();
        tensors[0] = NamedTensor::new("block1_conv1_w", vec![64, 1, 3, 3], vec![0.0; 64 * 9]).unwrap();
        let store = WeightStore::from_bytes(&WeightStore::new(tensors).to_bytes()).unwrap();
        assert!(matches!(store.validate_vgg16(), Err(CnnError::Shape(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = vgg16_store().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(WeightStore::from_bytes(&bytes), Err(CnnError::BadMagic { .. })));
        let mut bytes = WeightStore::default().to_bytes();
        bytes[4] = 9;
        assert!(matches!(WeightStore::from_bytes(&bytes), Err(CnnError::UnsupportedVersion(9))));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = vgg16_store().to_bytes();
        for cut in [2, 10, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(WeightStore::from_bytes(&bytes[..cut]), Err(CnnError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn missing_layers_fail_vgg_validation() {
        let tensors = vgg16_store().tensors()[..24].to_vec();
        assert!(WeightStore::new(tensors).validate_vgg16().is_err());
    }
}
