//! Independent reference implementations shared by the integration tests.
//! Each one follows its definition literally and shares no code with the
//! library path it checks.
#![allow(dead_code)]

use covsev_core::cnn::{NamedTensor, Tensor3, WeightStore};
use covsev_core::imaging::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> GrayImage {
    GrayImage::from_fn(h, w, |_, _| rng.gen()).unwrap()
}

fn round_half_up(num: i128, den: i128) -> i128 {
    (2 * num + den).div_euclid(2 * den)
}

/// Bilinear resize evaluated pixel by pixel with exact rationals:
/// `src = (d + 1/2) * in / out - 1/2` clamped to `[0, in - 1]`.
pub fn resize_oracle(img: &GrayImage, out_h: usize, out_w: usize) -> GrayImage {
    // Source coordinate as (integer part, numerator, denominator).
    fn source(d: usize, input: usize, output: usize) -> (usize, usize, i128, i128) {
        let den = 2 * output as i128;
        let mut num = (2 * d as i128 + 1) * input as i128 - output as i128;
        if num < 0 {
            num = 0;
        }
        if num > (input as i128 - 1) * den {
            num = (input as i128 - 1) * den;
        }
        let i0 = (num / den) as usize;
        let i1 = if i0 + 1 < input { i0 + 1 } else { input - 1 };
        (i0, i1, num - i0 as i128 * den, den)
    }
    GrayImage::from_fn(out_h, out_w, |oy, ox| {
        let (y0, y1, fy, dy) = source(oy, img.height(), out_h);
        let (x0, x1, fx, dx) = source(ox, img.width(), out_w);
        let p = |y: usize, x: usize| img.get(y, x) as i128;
        let num = (dy - fy) * (dx - fx) * p(y0, x0)
            + (dy - fy) * fx * p(y0, x1)
            + fy * (dx - fx) * p(y1, x0)
            + fy * fx * p(y1, x1);
        round_half_up(num, dy * dx).clamp(0, 255) as u8
    })
    .unwrap()
}

/// Median by materializing and sorting every replicated-edge window.
pub fn median_oracle(img: &GrayImage, radius: usize) -> GrayImage {
    let (h, w) = img.dims();
    let r = radius as isize;
    GrayImage::from_fn(h, w, |y, x| {
        let mut window = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                window.push(img.get(sy, sx));
            }
        }
        window.sort_unstable();
        window[window.len() / 2]
    })
    .unwrap()
}

fn equalization_table(hist: &[u64; 256], n: u64) -> Option<[u8; 256]> {
    let mut cdf = [0u64; 256];
    let mut running = 0;
    for v in 0..256 {
        running += hist[v];
        cdf[v] = running;
    }
    let cdf_min = *cdf.iter().find(|&&c| c > 0)?;
    if cdf_min == n {
        return None;
    }
    let mut table = [0u8; 256];
    for v in 0..256 {
        let num = (cdf[v] as i128 - cdf_min as i128).max(0) * 255;
        table[v] = round_half_up(num, (n - cdf_min) as i128).clamp(0, 255) as u8;
    }
    Some(table)
}

/// Global histogram equalization straight from the cdf formula.
pub fn equalize_oracle(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    match equalization_table(&hist, img.data().len() as u64) {
        None => img.clone(),
        Some(t) => GrayImage::from_fn(img.height(), img.width(), |y, x| t[img.get(y, x) as usize]).unwrap(),
    }
}

/// CLAHE written step by step: tiles of ceil(H/rows) x ceil(W/cols), clipped
/// and redistributed histograms, cdf tables, then a per-pixel bilinear blend
/// of the four nearest tile centers found by scanning all centers.
pub fn clahe_oracle(img: &GrayImage, grid_rows: usize, grid_cols: usize, clip_factor: f64) -> GrayImage {
    let (h, w) = img.dims();
    let th = (h + grid_rows - 1) / grid_rows;
    let tw = (w + grid_cols - 1) / grid_cols;
    let mut row_tiles = Vec::new();
    let mut y = 0;
    while y < h {
        row_tiles.push((y, (y + th).min(h)));
        y += th;
    }
    let mut col_tiles = Vec::new();
    let mut x = 0;
    while x < w {
        col_tiles.push((x, (x + tw).min(w)));
        x += tw;
    }

    let mut tables = vec![vec![[0u8; 256]; col_tiles.len()]; row_tiles.len()];
    for (ty, &(y0, y1)) in row_tiles.iter().enumerate() {
        for (tx, &(x0, x1)) in col_tiles.iter().enumerate() {
            let mut hist = [0u64; 256];
            for yy in y0..y1 {
                for xx in x0..x1 {
                    hist[img.get(yy, xx) as usize] += 1;
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as u64;
            let identity: [u8; 256] = std::array::from_fn(|v| v as u8);
            if hist.iter().filter(|&&c| c != 0).count() == 1 {
                tables[ty][tx] = identity;
                continue;
            }
            let limit_f = (clip_factor * n as f64 / 256.0).floor();
            if limit_f.is_finite() && limit_f < n as f64 {
                let limit = (limit_f as u64).max(1);
                let mut excess = 0;
                for c in hist.iter_mut() {
                    if *c > limit {
                        excess += *c - limit;
                        *c = limit;
                    }
                }
                for c in hist.iter_mut() {
                    *c += excess / 256;
                }
                for c in hist.iter_mut().take((excess % 256) as usize) {
                    *c += 1;
                }
            }
            tables[ty][tx] = equalization_table(&hist, n).unwrap_or(identity);
        }
    }

    // Centers doubled so they stay integral.
    let centers = |tiles: &[(usize, usize)]| -> Vec<i128> {
        tiles.iter().map(|&(a, b)| (a + b - 1) as i128).collect()
    };
    let cy = centers(&row_tiles);
    let cx = centers(&col_tiles);
    // (lower tile, upper tile, weight numerator, weight denominator)
    let locate = |pos: i128, c: &[i128]| -> (usize, usize, i128, i128) {
        if pos <= c[0] {
            return (0, 0, 0, 1);
        }
        let last = c.len() - 1;
        if pos >= c[last] {
            return (last, last, 0, 1);
        }
        for t in 0..last {
            if c[t] <= pos && pos < c[t + 1] {
                return (t, t + 1, pos - c[t], c[t + 1] - c[t]);
            }
        }
        unreachable!()
    };
    GrayImage::from_fn(h, w, |y, x| {
        let v = img.get(y, x) as usize;
        let (t0, t1, ny, dy) = locate(2 * y as i128, &cy);
        let (s0, s1, nx, dx) = locate(2 * x as i128, &cx);
        let m = |a: usize, b: usize| tables[a][b][v] as i128;
        let num = (dy - ny) * (dx - nx) * m(t0, s0)
            + (dy - ny) * nx * m(t0, s1)
            + ny * (dx - nx) * m(t1, s0)
            + ny * nx * m(t1, s1);
        round_half_up(num, dy * dx).clamp(0, 255) as u8
    })
    .unwrap()
}

/// Direct zero-padded 3x3 convolution, `f64` accumulation starting from the bias.
pub fn conv_oracle(input: &Tensor3, out_c: usize, kernel: &[f32], bias: &[f32]) -> Tensor3 {
    let (c, h, w) = input.shape();
    let mut out = Vec::with_capacity(out_c * h * w);
    for o in 0..out_c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[o] as f64;
                for ch in 0..c {
                    for i in 0..3 {
                        for j in 0..3 {
                            let sy = y as isize + i as isize - 1;
                            let sx = x as isize + j as isize - 1;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            let k = kernel[((o * c + ch) * 3 + i) * 3 + j] as f64;
                            acc += k * input.get(ch, sy as usize, sx as usize) as f64;
                        }
                    }
                }
                out.push(acc as f32);
            }
        }
    }
    Tensor3::new(out_c, h, w, out).unwrap()
}

/// Max over every 2x2 window by explicit scan.
pub fn maxpool_oracle(t: &Tensor3) -> Tensor3 {
    let (c, h, w) = t.shape();
    let mut out = Vec::new();
    for ch in 0..c {
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let vals = [
                    t.get(ch, 2 * y, 2 * x),
                    t.get(ch, 2 * y, 2 * x + 1),
                    t.get(ch, 2 * y + 1, 2 * x),
                    t.get(ch, 2 * y + 1, 2 * x + 1),
                ];
                out.push(vals.iter().cloned().fold(f32::MIN, f32::max));
            }
        }
    }
    Tensor3::new(c, h / 2, w / 2, out).unwrap()
}

/// Random VGG-16 shaped weight store.
pub fn random_vgg16_store(seed: u64) -> WeightStore {
    let mut rng = rng(seed);
    let blocks = [2, 2, 3, 3, 3];
    let channels = [64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512];
    let mut tensors = Vec::new();
    let mut in_c = 3;
    let mut layer = 0;
    for (b, &convs) in blocks.iter().enumerate() {
        for k in 1..=convs {
            let out_c = channels[layer];
            // He-style scale keeps activations in range through 13 layers.
            let scale = (2.0 / (in_c * 9) as f32).sqrt();
            let n = out_c * in_c * 9;
            let kernel: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0f32..1.0) * scale * 1.7).collect();
            let bias: Vec<f32> = (0..out_c).map(|_| rng.gen_range(-0.1f32..0.1)).collect();
            tensors.push(NamedTensor::new(format!("block{}_conv{k}_w", b + 1), vec![out_c, in_c, 3, 3], kernel).unwrap());
            tensors.push(NamedTensor::new(format!("block{}_conv{k}_b", b + 1), vec![out_c], bias).unwrap());
            in_c = out_c;
            layer += 1;
        }
    }
    WeightStore::new(tensors)
}

/// Maximizes the SVM dual by accelerated projected gradient ascent over the
/// box `[0, C]^n` intersected with `y . a = 0`. Returns (objective, alphas).
pub fn dual_qp_oracle(gram: &[f64], y: &[f64], c: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[i * n + j];
    let objective = |a: &[f64]| {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * q(i, j);
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    };
    // Euclidean projection: a_i = clip(v_i - lambda y_i), lambda by bisection.
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |lam: f64| -> (f64, Vec<f64>) {
            let a: Vec<f64> = (0..n).map(|i| (v[i] - lam * y[i]).clamp(0.0, c)).collect();
            ((0..n).map(|i| a[i] * y[i]).sum(), a)
        };
        let reach = v.iter().fold(c, |m, x| m.max(x.abs())) + c;
        let (mut lo, mut hi) = (-reach, reach);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if at(mid).0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi)).1
    };
    let lipschitz: f64 = (0..n).map(|i| q(i, i)).sum::<f64>().max(1e-12);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n).map(|i| 1.0 - (0..n).map(|j| q(i, j) * a[j]).sum::<f64>()).collect()
    };
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    let mut current = objective(&a);
    let mut best = (current, a.clone());
    for _ in 0..40_000 {
        let g = grad(&z);
        let next = project(&(0..n).map(|i| z[i] + step * g[i]).collect::<Vec<_>>());
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let obj = objective(&next);
        if obj > best.0 {
            best = (obj, next.clone());
        }
        // Restart momentum when the objective stops improving.
        if obj < current {
            z = a.clone();
            t = 1.0;
            continue;
        }
        z = (0..n).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - a[i])).collect();
        a = next;
        current = obj;
        t = t_next;
    }
    best
}

/// AUC by counting concordant positive/negative pairs, ties counted half.
pub fn auc_pair_oracle(scores: &[f64], truth: &[bool]) -> f64 {
    let mut concordant = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !truth[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truth[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                concordant += 1.0;
            } else if si == sj {
                concordant += 0.5;
            }
        }
    }
    concordant / pairs
}
