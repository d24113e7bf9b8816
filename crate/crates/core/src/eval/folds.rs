use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, Result};

/// Splits sample indices into `k` disjoint folds that preserve class
/// proportions.
///
/// Each class is shuffled (classes in ascending order, one seeded stream)
/// and dealt round-robin. A class starts dealing where the previous class
/// stopped, so fold sizes as well as per-class fold counts differ by at
/// most one. Indices within a fold are ascending.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(EvalError::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if members.iter().filter(|m| !m.is_empty()).count() < 2 {
        return Err(EvalError::SingleClass);
    }
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < k {
            return Err(EvalError::ClassTooSmall {
                class,
                count: m.len(),
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut cursor = 0;
    for mut m in members {
        m.shuffle(&mut rng);
        for idx in m {
            folds[cursor].push(idx);
            cursor = (cursor + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
