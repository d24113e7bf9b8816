use std::io::Write;
use std::path::Path;

use super::{GrayImage, ImagingError, Result};

/// `round(0.299 R + 0.587 G + 0.114 B)`, exact in integer arithmetic.
#[inline]
pub fn rgb_to_luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Reads a PGM (binary P5), PNG or JPEG file as 8-bit grayscale.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes).map_err(|e| match e {
        ImagingError::Decode { reason, .. } => ImagingError::Decode {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Decodes in-memory image bytes. Color images are converted to luminance.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        return parse_pgm(bytes);
    }
    let decoded = image::load_from_memory(bytes).map_err(|e| decode_err(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data = match decoded {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| rgb_to_luma(p[0], p[1], p[2]))
            .collect(),
    };
    GrayImage::new(h, w, data)
}

fn decode_err(reason: impl Into<String>) -> ImagingError {
    ImagingError::Decode {
        path: Default::default(),
        reason: reason.into(),
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pgm(&bytes).map_err(|e| match e {
        ImagingError::Decode { reason, .. } => ImagingError::Decode {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if !bytes.starts_with(b"P5") {
        return Err(decode_err("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace and '#' comments may separate header tokens.
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(decode_err("truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err("malformed PGM header"))?;
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(decode_err(format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte ends the header.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(decode_err("malformed PGM header"));
    }
    pos += 1;
    let need = w
        .checked_mul(h)
        .ok_or_else(|| decode_err("PGM dimensions overflow"))?;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| decode_err("truncated PGM payload"))?;
    GrayImage::new(h, w, payload.to_vec()).map_err(|e| decode_err(e.to_string()))
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    let io_err = |source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    write!(file, "P5\n{} {}\n255\n", img.width(), img.height()).map_err(io_err)?;
    file.write_all(img.data()).map_err(io_err)?;
    file.flush().map_err(io_err)
}
