use super::{round_ratio, GrayImage, ImagingError, Result};

/// Source sampling position for one output coordinate, kept as an exact
/// fraction `lo + frac / den` so that ties round identically everywhere.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: u64,
}

/// Half-pixel-center mapping `src = (dst + 0.5) * in / out - 0.5`, clamped to
/// `[0, in - 1]`. Returned fractions share the denominator `2 * out`.
fn taps(input: usize, output: usize) -> (Vec<Tap>, u64) {
    let den = 2 * output as i64;
    let max = (input as i64 - 1) * den;
    let taps = (0..output)
        .map(|d| {
            let num = ((2 * d as i64 + 1) * input as i64 - output as i64).clamp(0, max);
            let lo = (num / den) as usize;
            Tap {
                lo,
                hi: (lo + 1).min(input - 1),
                frac: (num % den) as u64,
            }
        })
        .collect();
    (taps, den as u64)
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if out_h == 0 || out_w == 0 {
        return Err(ImagingError::InvalidArgument(format!(
            "resize target must be positive, got {out_h}x{out_w}"
        )));
    }
    if img.dims() == (out_h, out_w) {
        return Ok(img.clone());
    }
    let (rows, den_y) = taps(img.height(), out_h);
    let (cols, den_x) = taps(img.width(), out_w);
    let den = den_y * den_x;

    let mut data = Vec::with_capacity(out_h * out_w);
    for ty in &rows {
        let top = img.row(ty.lo);
        let bottom = img.row(ty.hi);
        let wy1 = ty.frac;
        let wy0 = den_y - wy1;
        for tx in &cols {
            let wx1 = tx.frac;
            let wx0 = den_x - wx1;
            let upper = wx0 * top[tx.lo] as u64 + wx1 * top[tx.hi] as u64;
            let lower = wx0 * bottom[tx.lo] as u64 + wx1 * bottom[tx.hi] as u64;
            let v = round_ratio(wy0 * upper + wy1 * lower, den);
            data.push(v.min(255) as u8);
        }
    }
    GrayImage::new(out_h, out_w, data)
}
