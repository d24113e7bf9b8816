use super::{GrayImage, ImagingError, Result, HIST_BINS};

/// Median over a `(2r+1)^2` window with edge replication.
///
/// Runs a sliding histogram along each row, so the cost per pixel is linear
/// in the window side instead of its area.
pub fn median_filter(img: &GrayImage, radius: usize) -> Result<GrayImage> {
    if radius == 0 {
        return Err(ImagingError::InvalidArgument(
            "median radius must be at least 1".into(),
        ));
    }
    let (h, w) = img.dims();
    let r = radius as isize;
    let side = 2 * radius + 1;
    // Rank of the median inside the sorted window (0-based).
    let rank = (side * side / 2) as u32;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;

    let mut out = vec![0u8; h * w];
    let mut window_rows: Vec<&[u8]> = Vec::with_capacity(side);
    for y in 0..h {
        window_rows.clear();
        window_rows.extend((-r..=r).map(|dy| img.row(clamp_y(y as isize + dy))));

        let mut hist = [0u32; HIST_BINS];
        for row in &window_rows {
            for dx in -r..=r {
                hist[row[clamp_x(dx)] as usize] += 1;
            }
        }
        out[y * w] = select_rank(&hist, rank);

        for x in 1..w {
            let leaving = clamp_x(x as isize - 1 - r);
            let entering = clamp_x(x as isize + r);
            for row in &window_rows {
                hist[row[leaving] as usize] -= 1;
                hist[row[entering] as usize] += 1;
            }
            out[y * w + x] = select_rank(&hist, rank);
        }
    }
    GrayImage::new(h, w, out)
}

#[inline]
fn select_rank(hist: &[u32; HIST_BINS], rank: u32) -> u8 {
    let mut seen = 0u32;
    for (v, &c) in hist.iter().enumerate() {
        seen += c;
        if seen > rank {
            return v as u8;
        }
    }
    unreachable!("window histogram holds fewer samples than its rank")
}
