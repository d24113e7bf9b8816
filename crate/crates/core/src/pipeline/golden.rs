//! Golden fixtures for checking the inference engine against a reference
//! implementation.
//!
//! A fixture directory holds:
//!
//! ```text
//! input.pgm          224x224 binary PGM, fed to the network as-is
//!                    (channel replication and mean subtraction only)
//! input_tensor.f32   expected (3, 224, 224) input tensor, raw f32 LE
//! features.f32       expected 25088 flattened features, raw f32 LE
//! SHA256SUMS         "<hex digest>  <file name>" per payload file
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{io_err, PipelineError, Result};
use crate::cnn::VGG16_FEATURE_LEN;
use crate::imaging::{read_pgm, write_pgm, GrayImage, NETWORK_INPUT_SIDE};

pub const INPUT_FILE: &str = "input.pgm";
pub const TENSOR_FILE: &str = "input_tensor.f32";
pub const FEATURES_FILE: &str = "features.f32";
pub const SUMS_FILE: &str = "SHA256SUMS";

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenFixture {
    pub input: GrayImage,
    pub input_tensor: Vec<f32>,
    pub features: Vec<f32>,
}

/// The fixture input: a diagonal ramp, `round(255 (r + c) / 446)`.
pub fn golden_pattern() -> GrayImage {
    let span = 2 * (NETWORK_INPUT_SIDE as u64 - 1);
    GrayImage::from_fn(NETWORK_INPUT_SIDE, NETWORK_INPUT_SIDE, |r, c| {
        ((2 * 255 * (r + c) as u64 + span) / (2 * span)) as u8
    })
    .expect("fixed positive size")
}

/// `max |got - expected| / max |expected|`.
pub fn max_relative_error(got: &[f32], expected: &[f32]) -> f64 {
    assert_eq!(got.len(), expected.len(), "length mismatch");
    let scale = expected.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
    let diff = got
        .iter()
        .zip(expected)
        .fold(0.0f64, |m, (&a, &b)| m.max((a as f64 - b as f64).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn f32s(bytes: &[u8], what: &str) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(PipelineError::InvalidArgument(format!("{what} length is not a multiple of 4")));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_golden(dir: &Path, fixture: &GoldenFixture) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_pgm(&fixture.input, &dir.join(INPUT_FILE))?;
    let payloads = [
        (TENSOR_FILE, f32_bytes(&fixture.input_tensor)),
        (FEATURES_FILE, f32_bytes(&fixture.features)),
    ];
    for (name, bytes) in &payloads {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(io_err(&p))?;
    }
    let mut sums = String::new();
    for name in [INPUT_FILE, TENSOR_FILE, FEATURES_FILE] {
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        let _ = writeln!(sums, "{}  {name}", hex::encode(Sha256::digest(&bytes)));
    }
    let p = dir.join(SUMS_FILE);
    std::fs::write(&p, sums).map_err(io_err(&p))
}

/// Loads a fixture, verifying every listed checksum and the payload sizes.
pub fn load_golden(dir: &Path) -> Result<GoldenFixture> {
    let sums_path = dir.join(SUMS_FILE);
    let sums = std::fs::read_to_string(&sums_path).map_err(io_err(&sums_path))?;
    let mut listed = Vec::new();
    for (i, line) in sums.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (digest, name) = line
            .split_once(char::is_whitespace)
            .map(|(d, n)| (d, n.trim_start().trim_start_matches('*')))
            .ok_or_else(|| PipelineError::Parse {
                path: sums_path.clone(),
                line: i + 1,
                reason: "expected `<digest>  <file>`".into(),
            })?;
        let p = dir.join(name);
        let bytes = std::fs::read(&p).map_err(io_err(&p))?;
        let actual = hex::encode(Sha256::digest(&bytes));
        if !actual.eq_ignore_ascii_case(digest) {
            return Err(PipelineError::InvalidArgument(format!(
                "checksum mismatch for {name}: listed {digest}, computed {actual}"
            )));
        }
        listed.push(name.to_string());
    }
    for required in [INPUT_FILE, TENSOR_FILE, FEATURES_FILE] {
        if !listed.iter().any(|n| n == required) {
            return Err(PipelineError::InvalidArgument(format!("{SUMS_FILE} does not list {required}")));
        }
    }
    let input = read_pgm(&dir.join(INPUT_FILE))?;
    let read = |name: &str| -> Result<Vec<f32>> {
        let p = dir.join(name);
        f32s(&std::fs::read(&p).map_err(io_err(&p))?, name)
    };
    let input_tensor = read(TENSOR_FILE)?;
    let features = read(FEATURES_FILE)?;
    let side = NETWORK_INPUT_SIDE;
    if input.dims() != (side, side) || input_tensor.len() != 3 * side * side || features.len() != VGG16_FEATURE_LEN {
        return Err(PipelineError::InvalidArgument(format!(
            "fixture shapes: input {:?}, tensor {} values, features {} values",
            input.dims(),
            input_tensor.len(),
            features.len()
        )));
    }
    Ok(GoldenFixture {
        input,
        input_tensor,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_spans_full_range() {
        let g = golden_pattern();
        assert_eq!(g.get(0, 0), 0);
        assert_eq!(g.get(223, 223), 255);
        assert_eq!(g.get(0, 223), 128);
    }

    #[test]
    fn relative_error_is_scaled_by_reference_peak() {
        assert_eq!(max_relative_error(&[1.0, 2.0], &[1.0, 4.0]), 0.5);
        assert_eq!(max_relative_error(&[0.0], &[0.0]), 0.0);
    }
}
