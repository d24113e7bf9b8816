use serde::{Deserialize, Serialize};

use super::kernel::gram_matrix;
use super::{FeatureMatrix, Kernel, Result, SvmError};

/// Relative slack for snapping multipliers onto the box bounds.
const BOUND_EPS: f64 = 1e-12;
/// Smallest multiplier change that counts as progress.
const STEP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Box constraint `C`.
    pub c: f64,
    pub kernel: Kernel,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Consecutive violation-free sweeps required before stopping. The
    /// solver tests the exact KKT gap, so a clean check never changes on
    /// a repeat sweep and any value of at least 1 behaves the same.
    pub max_passes: usize,
    /// Cap on successful pair updates.
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: Kernel::Linear,
            tol: 1e-3,
            max_passes: 10,
            max_iter: 1_000_000,
        }
    }
}

impl SmoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidArgument("max_passes must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

/// Dual multipliers for every training point plus the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Successful pair updates.
    pub iterations: usize,
}

/// Binary soft-margin classifier `f(x) = sum_i coeff_i K(sv_i, x) + bias`,
/// where `coeff_i = alpha_i * y_i` and only points with `alpha_i > 0` are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: FeatureMatrix,
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
}

impl BinarySvm {
    pub fn dim(&self) -> usize {
        self.support_vectors.dim()
    }

    pub fn decision_value(&self, x: &[f32]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(SvmError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f32]) -> f64 {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coeffs)
            .map(|(sv, &coef)| coef * self.kernel.apply(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Weight vector of a linear model; `None` for other kernels.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let mut w = vec![0.0; self.dim()];
        for (sv, &coef) in self.support_vectors.iter_rows().zip(&self.dual_coeffs) {
            for (wi, &v) in w.iter_mut().zip(sv) {
                *wi += coef * v as f64;
            }
        }
        Some(w)
    }

    fn from_solution(x: &FeatureMatrix, y: &[f64], sol: &SmoSolution, params: &SmoParams) -> Self {
        let keep: Vec<usize> = (0..sol.alphas.len()).filter(|&i| sol.alphas[i] > 0.0).collect();
        Self {
            kernel: params.kernel,
            c: params.c,
            support_vectors: x.select(&keep),
            dual_coeffs: keep.iter().map(|&i| sol.alphas[i] * y[i]).collect(),
            bias: sol.bias,
        }
    }
}

fn check_inputs(x: &FeatureMatrix, y: &[f64], params: &SmoParams) -> Result<()> {
    params.validate()?;
    if x.rows() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if let Some(v) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidArgument(format!("labels must be -1 or +1, found {v}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClass);
    }
    Ok(())
}

/// Solves the soft-margin dual
/// `max sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)`
/// subject to `0 <= a_i <= C` and `sum a_i y_i = 0`.
pub fn smo_solve(x: &FeatureMatrix, y: &[f64], params: &SmoParams) -> Result<SmoSolution> {
    check_inputs(x, y, params)?;
    let gram = gram_matrix(&params.kernel, x);
    solve_with_gram(&gram, y, params).map_err(|last| SvmError::NotConverged {
        iterations: last.iterations,
        best: Box::new(BinarySvm::from_solution(x, y, &last, params)),
    })
}

pub fn smo_train(x: &FeatureMatrix, y: &[f64], params: &SmoParams) -> Result<BinarySvm> {
    let sol = smo_solve(x, y, params)?;
    Ok(BinarySvm::from_solution(x, y, &sol, params))
}

/// Trains against a precomputed Gram matrix. Labels must already be checked.
pub(crate) fn train_with_gram(
    x: &FeatureMatrix,
    gram: &[f64],
    y: &[f64],
    params: &SmoParams,
) -> Result<BinarySvm> {
    check_inputs(x, y, params)?;
    match solve_with_gram(gram, y, params) {
        Ok(sol) => Ok(BinarySvm::from_solution(x, y, &sol, params)),
        Err(last) => Err(SvmError::NotConverged {
            iterations: last.iterations,
            best: Box::new(BinarySvm::from_solution(x, y, &last, params)),
        }),
    }
}

/// Tolerance factor for the refinement phase that follows convergence at
/// `tol`. KKT residuals of `tol` still leave the dual objective visibly short
/// of its optimum; the refinement closes most of that gap.
const REFINE_FACTOR: f64 = 1e-3;

/// Returns the last iterate as `Err` when the update cap is hit before the
/// KKT conditions hold within `tol`.
fn solve_with_gram(gram: &[f64], y: &[f64], params: &SmoParams) -> std::result::Result<SmoSolution, SmoSolution> {
    let mut s = Solver::new(gram, y, params.c);
    let mut iterations = 0;
    if !s.run(params.tol, &mut iterations, params.max_iter) {
        return Err(s.into_solution(iterations));
    }
    let converged = (s.alpha.clone(), s.out.clone(), s.b, iterations);
    if !s.run(params.tol * REFINE_FACTOR, &mut iterations, params.max_iter) {
        // Out of budget while refining: keep the iterate that met `tol`.
        (s.alpha, s.out, s.b, iterations) = converged;
    }
    Ok(s.into_solution(iterations))
}

struct Solver<'a> {
    gram: &'a [f64],
    y: &'a [f64],
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    /// `sum_j alpha_j y_j K(j, i)`, i.e. the decision value without bias.
    out: Vec<f64>,
    b: f64,
}

impl<'a> Solver<'a> {
    fn new(gram: &'a [f64], y: &'a [f64], c: f64) -> Self {
        let n = y.len();
        Self {
            gram,
            y,
            n,
            c,
            alpha: vec![0.0; n],
            out: vec![0.0; n],
            b: 0.0,
        }
    }

    /// `F_i = y_i - out_i`: the bias that would put point `i` exactly on
    /// its margin. KKT holds for bias `b` iff `F_i <= b` on the lower set
    /// and `F_i >= b` on the upper set.
    #[inline]
    fn f(&self, i: usize) -> f64 {
        self.y[i] - self.out[i]
    }

    /// Points whose KKT condition bounds the bias from below: free ones,
    /// positives at 0 and negatives at C.
    fn in_lower(&self, i: usize) -> bool {
        self.is_free(i) || ((self.y[i] > 0.0) == (self.alpha[i] == 0.0))
    }

    /// Points bounding the bias from above: free ones, positives at C and
    /// negatives at 0.
    fn in_upper(&self, i: usize) -> bool {
        self.is_free(i) || ((self.y[i] > 0.0) == (self.alpha[i] >= self.c))
    }

    /// The maximal violating pair: `argmax F` over the lower set and
    /// `argmin F` over the upper set, lowest index on ties.
    fn extreme_pair(&self) -> Option<(usize, usize)> {
        let mut low: Option<usize> = None;
        let mut up: Option<usize> = None;
        for i in 0..self.n {
            if self.in_lower(i) && low.is_none_or(|l| self.f(i) > self.f(l)) {
                low = Some(i);
            }
            if self.in_upper(i) && up.is_none_or(|u| self.f(i) < self.f(u)) {
                up = Some(i);
            }
        }
        Some((low?, up?))
    }

    /// Optimizes pairs until the widest KKT gap `max_low F - min_up F` is at
    /// most `tol`, then sets the bias. Any bias inside the final gap leaves
    /// every residual within `tol`. False when the update cap is hit or no
    /// violating pair can make numerical progress.
    fn run(&mut self, tol: f64, iterations: &mut usize, max_iter: usize) -> bool {
        let done = loop {
            let Some((low, up)) = self.extreme_pair() else { break true };
            if self.f(low) - self.f(up) <= tol {
                break true;
            }
            if *iterations >= max_iter {
                break false;
            }
            if !(self.take_step(low, up) || self.fallback(low, up, tol)) {
                break false;
            }
            *iterations += 1;
        };
        self.finalize_bias();
        done
    }

    /// When the extreme pair is numerically stuck, tries every other
    /// violating partner of either end in index order.
    fn fallback(&mut self, low: usize, up: usize, tol: f64) -> bool {
        for j in 0..self.n {
            if j != up && self.in_upper(j) && self.f(low) - self.f(j) > tol && self.take_step(low, j) {
                return true;
            }
        }
        for i in 0..self.n {
            if i != low && self.in_lower(i) && self.f(i) - self.f(up) > tol && self.take_step(i, up) {
                return true;
            }
        }
        false
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    /// Prediction error `f(x_i) - y_i` at the current bias. Differences of
    /// errors do not depend on the bias.
    #[inline]
    fn error(&self, i: usize) -> f64 {
        self.out[i] + self.b - self.y[i]
    }

    fn is_free(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (ei, ej) = (self.error(i), self.error(j));
        let c = self.c;
        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        if hi - lo <= BOUND_EPS * c {
            return false;
        }
        let (kii, kjj, kij) = (self.k(i, i), self.k(j, j), self.k(i, j));
        let eta = kii + kjj - 2.0 * kij;
        // Along the constraint line the objective changes by
        // slope * t - eta / 2 * t^2 for a step t in alpha_j.
        let slope = yj * (ei - ej);
        let mut aj_new = if eta > 1e-12 {
            (aj + slope / eta).clamp(lo, hi)
        } else {
            let gain = |t: f64| slope * (t - aj) - 0.5 * eta * (t - aj) * (t - aj);
            let (g_lo, g_hi) = (gain(lo), gain(hi));
            if g_lo > g_hi + 1e-12 && g_lo > 0.0 {
                lo
            } else if g_hi > g_lo + 1e-12 && g_hi > 0.0 {
                hi
            } else {
                return false;
            }
        };
        if aj_new <= BOUND_EPS * c {
            aj_new = 0.0;
        } else if aj_new >= c * (1.0 - BOUND_EPS) {
            aj_new = c;
        }
        if (aj_new - aj).abs() < STEP_EPS * (aj_new + aj + STEP_EPS) {
            return false;
        }
        let mut ai_new = ai + yi * yj * (aj - aj_new);
        if ai_new <= BOUND_EPS * c {
            ai_new = 0.0;
        } else if ai_new >= c * (1.0 - BOUND_EPS) {
            ai_new = c;
        }
        let (di, dj) = (yi * (ai_new - ai), yj * (aj_new - aj));

        let n = self.n;
        let (row_i, row_j) = (&self.gram[i * n..(i + 1) * n], &self.gram[j * n..(j + 1) * n]);
        for ((o, &ki), &kj) in self.out.iter_mut().zip(row_i).zip(row_j) {
            *o += di * ki + dj * kj;
        }
        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        true
    }

    /// Bias as the mean of `y_i - out_i` over free vectors; with none free,
    /// the midpoint of the interval the bounded vectors allow.
    fn finalize_bias(&mut self) {
        let free: Vec<f64> = (0..self.n)
            .filter(|&i| self.is_free(i))
            .map(|i| self.y[i] - self.out[i])
            .collect();
        if !free.is_empty() {
            self.b = free.iter().sum::<f64>() / free.len() as f64;
            return;
        }
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.n {
            let v = self.y[i] - self.out[i];
            let at_zero = self.alpha[i] == 0.0;
            // y = +1 at 0 and y = -1 at C bound b from below; the rest from above.
            if (self.y[i] > 0.0) == at_zero {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
        self.b = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        };
    }

    fn into_solution(self, iterations: usize) -> SmoSolution {
        SmoSolution {
            alphas: self.alpha,
            bias: self.b,
            iterations,
        }
    }
}

/// `sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)`.
pub fn dual_objective(x: &FeatureMatrix, y: &[f64], kernel: &Kernel, alphas: &[f64]) -> f64 {
    let mut quad = 0.0;
    for i in 0..alphas.len() {
        for j in 0..alphas.len() {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel.apply(x.row(i), x.row(j));
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Per-point KKT violation of a solution: `max(0, 1 - y f)` at `a = 0`,
/// `max(0, y f - 1)` at `a = C`, `|y f - 1|` in between.
pub fn kkt_residuals(x: &FeatureMatrix, y: &[f64], params: &SmoParams, sol: &SmoSolution) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            let f: f64 = (0..x.rows())
                .map(|j| sol.alphas[j] * y[j] * params.kernel.apply(x.row(j), x.row(i)))
                .sum::<f64>()
                + sol.bias;
            let m = y[i] * f;
            let a = sol.alphas[i];
            if a <= 0.0 {
                (1.0 - m).max(0.0)
            } else if a >= params.c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .collect()
}
