use rayon::prelude::*;

use super::{CnnError, Result, Tensor3};

const KSIZE: usize = 3;
const TAPS: usize = KSIZE * KSIZE;

/// Output channels per register tile.
const MR: usize = 4;
/// Output pixels per register tile.
const NR: usize = 16;
/// Reduction depth packed at a time.
const KC: usize = 128;
/// Output pixels per band; bands are the unit of parallel work.
const PC: usize = 512;

/// 3x3 convolution weights laid out `(out_c, in_c, 3, 3)` plus one bias per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    out_c: usize,
    in_c: usize,
    kernel: Vec<f32>,
    bias: Vec<f32>,
}

impl ConvWeights {
    pub fn new(out_c: usize, in_c: usize, kernel: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if out_c == 0 || in_c == 0 {
            return Err(CnnError::Shape("convolution needs at least one channel".into()));
        }
        if kernel.len() != out_c * in_c * TAPS {
            return Err(CnnError::Shape(format!(
                "kernel ({out_c},{in_c},3,3) needs {} values, got {}",
                out_c * in_c * TAPS,
                kernel.len()
            )));
        }
        if bias.len() != out_c {
            return Err(CnnError::Shape(format!(
                "bias for {out_c} output channels has {} values",
                bias.len()
            )));
        }
        Ok(Self {
            out_c,
            in_c,
            kernel,
            bias,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_c
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn kernel(&self) -> &[f32] {
        &self.kernel
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }
}

/// 3x3, stride 1, zero "same" padding convolution.
///
/// Input patches are unrolled (im2col) one band of output pixels and one
/// block of reduction rows at a time, then multiplied against the kernel
/// matrix. Every output accumulates `bias + sum_k w[k] * x[k]` in `f64` in
/// ascending `k = (c, i, j)` order, so the result does not depend on the
/// blocking or on how bands are spread over threads.
pub fn conv2d(input: &Tensor3, weights: &ConvWeights) -> Result<Tensor3> {
    let (c, h, w) = input.shape();
    if c != weights.in_c {
        return Err(CnnError::InvalidArgument(format!(
            "kernel expects {} input channels, tensor has {c}",
            weights.in_c
        )));
    }
    let pixels = h * w;
    let out_c = weights.out_c;
    let bands: Vec<(usize, Vec<f32>)> = (0..pixels)
        .step_by(PC)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|p0| {
            let pc = PC.min(pixels - p0);
            (p0, conv_band(input, weights, p0, pc))
        })
        .collect();

    let mut out = vec![0f32; out_c * pixels];
    for (p0, band) in bands {
        let pc = band.len() / out_c;
        for o in 0..out_c {
            out[o * pixels + p0..o * pixels + p0 + pc].copy_from_slice(&band[o * pc..(o + 1) * pc]);
        }
    }
    Tensor3::new(out_c, h, w, out)
}

/// Computes output pixels `p0..p0+pc` for all output channels, laid out
/// `(out_c, pc)`.
fn conv_band(input: &Tensor3, weights: &ConvWeights, p0: usize, pc: usize) -> Vec<f32> {
    let k_total = weights.in_c * TAPS;
    let out_c = weights.out_c;
    let mut acc: Vec<f64> = weights
        .bias
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b as f64, pc))
        .collect();
    let mut col = vec![0f64; KC * pc];
    let mut k0 = 0;
    while k0 < k_total {
        let kc = KC.min(k_total - k0);
        pack_columns(input, k0, kc, p0, pc, &mut col);
        gemm_block(&weights.kernel, k_total, k0, kc, &col, pc, out_c, &mut acc);
        k0 += kc;
    }
    acc.into_iter().map(|v| v as f32).collect()
}

/// Fills `col[k][p]` with the input sample that tap `k0 + k` reads for
/// output pixel `p0 + p`, or zero where the tap falls into padding.
fn pack_columns(input: &Tensor3, k0: usize, kc: usize, p0: usize, pc: usize, col: &mut [f64]) {
    let (_, h, w) = input.shape();
    for k in 0..kc {
        let tap = k0 + k;
        let (ch, i, j) = (tap / TAPS, (tap % TAPS) / KSIZE, tap % KSIZE);
        let plane = input.channel(ch);
        let row = &mut col[k * pc..(k + 1) * pc];
        // Walk the band one image row at a time.
        let mut p = 0;
        while p < pc {
            let (y, x_start) = ((p0 + p) / w, (p0 + p) % w);
            let run = (w - x_start).min(pc - p);
            let dst = &mut row[p..p + run];
            let sy = y + i;
            if sy < 1 || sy > h {
                dst.fill(0.0);
            } else {
                let src = &plane[(sy - 1) * w..sy * w];
                for (n, slot) in dst.iter_mut().enumerate() {
                    let sx = x_start + n + j;
                    *slot = if sx >= 1 && sx <= w { src[sx - 1] as f64 } else { 0.0 };
                }
            }
            p += run;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gemm_block(
    kernel: &[f32],
    k_total: usize,
    k0: usize,
    kc: usize,
    col: &[f64],
    pc: usize,
    out_c: usize,
    acc: &mut [f64],
) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the CPU supports AVX-512F, checked just above.
            unsafe { gemm_block_avx512(kernel, k_total, k0, kc, col, pc, out_c, acc) };
            return;
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { gemm_block_avx2(kernel, k_total, k0, kc, col, pc, out_c, acc) };
            return;
        }
    }
    gemm_block_generic(kernel, k_total, k0, kc, col, pc, out_c, acc);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_block_avx512(
    kernel: &[f32],
    k_total: usize,
    k0: usize,
    kc: usize,
    col: &[f64],
    pc: usize,
    out_c: usize,
    acc: &mut [f64],
) {
    gemm_block_generic(kernel, k_total, k0, kc, col, pc, out_c, acc);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_block_avx2(
    kernel: &[f32],
    k_total: usize,
    k0: usize,
    kc: usize,
    col: &[f64],
    pc: usize,
    out_c: usize,
    acc: &mut [f64],
) {
    gemm_block_generic(kernel, k_total, k0, kc, col, pc, out_c, acc);
}

/// `acc[o][p] += sum_{k<kc} kernel[o][k0+k] * col[k][p]`, k ascending.
/// Separate multiply and add (no fused multiply-add) so every code path
/// rounds identically.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn gemm_block_generic(
    kernel: &[f32],
    k_total: usize,
    k0: usize,
    kc: usize,
    col: &[f64],
    pc: usize,
    out_c: usize,
    acc: &mut [f64],
) {
    let o_full = out_c - out_c % MR;
    let p_full = pc - pc % NR;
    for o in (0..o_full).step_by(MR) {
        let wrows: [&[f32]; MR] =
            std::array::from_fn(|r| &kernel[(o + r) * k_total + k0..(o + r) * k_total + k0 + kc]);
        for p in (0..p_full).step_by(NR) {
            let mut tile = [[0f64; NR]; MR];
            for r in 0..MR {
                tile[r].copy_from_slice(&acc[(o + r) * pc + p..(o + r) * pc + p + NR]);
            }
            for k in 0..kc {
                let c: &[f64; NR] = col[k * pc + p..k * pc + p + NR].try_into().unwrap();
                for r in 0..MR {
                    let wv = wrows[r][k] as f64;
                    for q in 0..NR {
                        tile[r][q] += wv * c[q];
                    }
                }
            }
            for r in 0..MR {
                acc[(o + r) * pc + p..(o + r) * pc + p + NR].copy_from_slice(&tile[r]);
            }
        }
        for r in 0..MR {
            gemm_scalar_row(wrows[r], kc, col, pc, p_full..pc, &mut acc[(o + r) * pc..(o + r + 1) * pc]);
        }
    }
    for o in o_full..out_c {
        let wrow = &kernel[o * k_total + k0..o * k_total + k0 + kc];
        gemm_scalar_row(wrow, kc, col, pc, 0..pc, &mut acc[o * pc..(o + 1) * pc]);
    }
}

#[inline(always)]
fn gemm_scalar_row(
    wrow: &[f32],
    kc: usize,
    col: &[f64],
    pc: usize,
    pixels: std::ops::Range<usize>,
    acc_row: &mut [f64],
) {
    for p in pixels {
        let mut a = acc_row[p];
        for k in 0..kc {
            a += wrow[k] as f64 * col[k * pc + p];
        }
        acc_row[p] = a;
    }
}
