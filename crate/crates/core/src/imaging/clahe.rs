use super::{round_ratio, ClaheParams, GrayImage, ImagingError, Result, HIST_BINS};

type Lut = [u8; HIST_BINS];

const IDENTITY: Lut = {
    let mut lut = [0u8; HIST_BINS];
    let mut i = 0;
    while i < HIST_BINS {
        lut[i] = i as u8;
        i += 1;
    }
    lut
};

/// Maps `v` to `round((cdf(v) - cdf_min) / (n - cdf_min) * 255)`.
///
/// Returns `None` when every sample sits in one bin; callers treat that as
/// the identity mapping.
fn cdf_lut(hist: &[u64; HIST_BINS], n: u64) -> Option<Lut> {
    let cdf_min = hist.iter().copied().find(|&c| c > 0)?;
    if cdf_min >= n {
        return None;
    }
    let span = n - cdf_min;
    let mut lut = [0u8; HIST_BINS];
    let mut cdf = 0u64;
    for (slot, &count) in lut.iter_mut().zip(hist.iter()) {
        cdf += count;
        let v = round_ratio(cdf.saturating_sub(cdf_min) * 255, span);
        *slot = v.min(255) as u8;
    }
    Some(lut)
}

/// Global histogram equalization with `cdf_min` normalization.
pub fn equalize_global(img: &GrayImage) -> GrayImage {
    let hist = img.histogram();
    match cdf_lut(&hist, img.data().len() as u64) {
        Some(lut) => apply_lut(img, &lut),
        None => img.clone(),
    }
}

fn apply_lut(img: &GrayImage, lut: &Lut) -> GrayImage {
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::new(img.height(), img.width(), data).expect("dimensions unchanged")
}

/// Clips every bin at `limit` and spreads the excess over all bins: an equal
/// share each, then the remainder one count per bin starting at bin 0.
fn clip_and_redistribute(hist: &mut [u64; HIST_BINS], limit: u64) {
    let mut excess = 0u64;
    for c in hist.iter_mut() {
        if *c > limit {
            excess += *c - limit;
            *c = limit;
        }
    }
    let share = excess / HIST_BINS as u64;
    let remainder = (excess % HIST_BINS as u64) as usize;
    for (i, c) in hist.iter_mut().enumerate() {
        *c += share + u64::from(i < remainder);
    }
}

/// `max(1, floor(clip_factor * n / bins))`, or `None` when clipping is off.
fn clip_limit(clip_factor: f64, n: u64) -> Option<u64> {
    let limit = (clip_factor * n as f64 / HIST_BINS as f64).floor();
    if !limit.is_finite() || limit >= n as f64 {
        return None;
    }
    Some((limit as u64).max(1))
}

/// Tile extents along one axis. Tiles are `ceil(len / grid)` long; the last
/// one may be shorter, and tiles that would start past the edge are dropped.
fn tile_spans(len: usize, grid: usize) -> Vec<(usize, usize)> {
    let size = len.div_ceil(grid);
    (0..len.div_ceil(size))
        .map(|t| (t * size, ((t + 1) * size).min(len)))
        .collect()
}

/// Interpolation weights of one pixel coordinate between two neighbouring
/// tile centers: the pixel blends tile `lo` and `hi` as `(den - num, num) / den`.
#[derive(Debug, Clone, Copy)]
struct Blend {
    lo: usize,
    hi: usize,
    num: u64,
    den: u64,
}

fn blends(len: usize, spans: &[(usize, usize)]) -> Vec<Blend> {
    // Doubled centers keep half-pixel positions integral.
    let centers: Vec<u64> = spans.iter().map(|&(a, b)| (a + b - 1) as u64).collect();
    let last = centers.len() - 1;
    let mut t = 0;
    (0..len)
        .map(|p| {
            let pos = 2 * p as u64;
            if pos <= centers[0] {
                return Blend { lo: 0, hi: 0, num: 0, den: 1 };
            }
            if pos >= centers[last] {
                return Blend { lo: last, hi: last, num: 0, den: 1 };
            }
            while centers[t + 1] <= pos {
                t += 1;
            }
            Blend {
                lo: t,
                hi: t + 1,
                num: pos - centers[t],
                den: centers[t + 1] - centers[t],
            }
        })
        .collect()
}

/// Contrast limited adaptive histogram equalization.
///
/// Per-tile clipped histograms produce lookup tables; each output pixel is
/// the bilinear blend of the four nearest tile tables, with edge replication
/// outside the outermost tile centers. Tiles whose pixels all share one
/// value map through the identity.
pub fn clahe(img: &GrayImage, params: &ClaheParams) -> Result<GrayImage> {
    params.validate()?;
    let (h, w) = img.dims();
    if h < params.grid_rows || w < params.grid_cols {
        return Err(ImagingError::InvalidArgument(format!(
            "{h}x{w} image is smaller than the {}x{} CLAHE grid",
            params.grid_rows, params.grid_cols
        )));
    }
    let row_spans = tile_spans(h, params.grid_rows);
    let col_spans = tile_spans(w, params.grid_cols);

    let mut luts = Vec::with_capacity(row_spans.len() * col_spans.len());
    for &(y0, y1) in &row_spans {
        for &(x0, x1) in &col_spans {
            let mut hist = [0u64; HIST_BINS];
            for y in y0..y1 {
                for &v in &img.row(y)[x0..x1] {
                    hist[v as usize] += 1;
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as u64;
            if hist.iter().filter(|&&c| c > 0).count() <= 1 {
                luts.push(IDENTITY);
                continue;
            }
            if let Some(limit) = clip_limit(params.clip_factor, n) {
                clip_and_redistribute(&mut hist, limit);
            }
            luts.push(cdf_lut(&hist, n).unwrap_or(IDENTITY));
        }
    }

    let tiles_x = col_spans.len();
    let row_blend = blends(h, &row_spans);
    let col_blend = blends(w, &col_spans);
    let mut data = Vec::with_capacity(h * w);
    for (y, by) in row_blend.iter().enumerate() {
        let (wy0, wy1) = (by.den - by.num, by.num);
        for (x, bx) in col_blend.iter().enumerate() {
            let (wx0, wx1) = (bx.den - bx.num, bx.num);
            let v = img.get(y, x) as usize;
            let at = |ty: usize, tx: usize| luts[ty * tiles_x + tx][v] as u64;
            let upper = wx0 * at(by.lo, bx.lo) + wx1 * at(by.lo, bx.hi);
            let lower = wx0 * at(by.hi, bx.lo) + wx1 * at(by.hi, bx.hi);
            let out = round_ratio(wy0 * upper + wy1 * lower, by.den * bx.den);
            data.push(out.min(255) as u8);
        }
    }
    GrayImage::new(h, w, data)
}
