use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

/// Receiver operating characteristic of one score list.
///
/// `points[0]` is `(0, 0)`; `points[i]` for `i >= 1` is the
/// (false-positive rate, true-positive rate) pair obtained by predicting
/// positive for every score `>= thresholds[i - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps every distinct score from high to low.
///
/// The area is accumulated as an exact integer trapezoid sum over the raw
/// counts and divided once, so it equals the pair-counting probability
/// (positive outscores negative, ties half) up to a single rounding.
pub fn roc_points(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(EvalError::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidArgument("NaN score".into()));
    }
    let pos = truth.iter().filter(|&&t| t).count() as u64;
    let neg = truth.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut thresholds = Vec::new();
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) as u128 * (tp + tp0) as u128;
        thresholds.push(s);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve {
        thresholds,
        points,
        auc,
    })
}
