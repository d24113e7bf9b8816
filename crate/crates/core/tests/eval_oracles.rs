mod common;

use covsev_core::eval::*;
use covsev_core::svm::{FeatureMatrix, SmoParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn class_counts_match_sample_recount() {
    for seed in 0..20 {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..200);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let cm = confusion_matrix(&truth, &pred, 3).unwrap();
        assert_eq!(cm.total(), n as u64);
        for c in 0..3 {
            let got = class_counts(&cm, c).unwrap();
            let pairs = truth.iter().zip(&pred);
            let count = |f: &dyn Fn(usize, usize) -> bool| pairs.clone().filter(|(&t, &p)| f(t, p)).count() as u64;
            assert_eq!(got.tp, count(&|t, p| t == c && p == c));
            assert_eq!(got.fp, count(&|t, p| t != c && p == c));
            assert_eq!(got.fn_, count(&|t, p| t == c && p != c));
            assert_eq!(got.tn, count(&|t, p| t != c && p != c));
            assert_eq!(got.tp + got.fp + got.fn_ + got.tn, n as u64);
        }
    }
}

#[test]
fn severity_confusions_and_trace_ratio() {
    // 0 non-COVID, 1 non-severe, 2 severe. The off-diagonal split of the
    // five non-COVID errors (3 non-severe, 2 severe) is the only one that
    // matches all three per-class precisions below.
    let rows = [[144u64, 3, 2], [0, 127, 3], [0, 8, 107]];
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    for (t, row) in rows.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            truth.extend(std::iter::repeat(t).take(n as usize));
            pred.extend(std::iter::repeat(p).take(n as usize));
        }
    }
    let cm = confusion_matrix(&truth, &pred, 3).unwrap();
    assert_eq!(cm.get(2, 1), 8);
    assert_eq!(cm.get(2, 2), 107);
    assert_eq!(overall_accuracy(&cm).unwrap(), 378.0 / 394.0);
    let severe = class_counts(&cm, 2).unwrap();
    assert_eq!((severe.tp, severe.fn_, severe.fp, severe.tn), (107, 8, 5, 274));

    // (precision, recall, f1) in percent per class, to 0.01.
    let published = [[100.0, 96.64, 98.29], [92.02, 97.69, 94.77], [95.53, 93.04, 94.27]];
    for (c, want) in published.iter().enumerate() {
        let m = class_metrics(class_counts(&cm, c).unwrap());
        let got = [m.precision.unwrap(), m.recall().unwrap(), m.f1.unwrap()].map(|v| 100.0 * v);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 0.01, "class {c}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn auc_matches_pair_counting() {
    for seed in 0..100 {
        let mut rng = common::rng(1000 + seed);
        let n = 50;
        // Coarse quantization forces plenty of tied scores.
        let levels = rng.gen_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        truth[0] = true;
        truth[1] = false;
        let roc = roc_points(&scores, &truth).unwrap();
        let oracle = common::auc_pair_oracle(&scores, &truth);
        assert!((roc.auc - oracle).abs() <= 1e-12, "seed {seed}: {} vs {oracle}", roc.auc);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert!(roc.points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert!(roc.thresholds.windows(2).all(|w| w[0] > w[1]));
    }
}

proptest! {
    #[test]
    fn auc_invariant_under_increasing_transform(
        raw in prop::collection::vec((0u8..20, any::<bool>()), 2..60),
        scale in 0.1f64..10.0,
        shift in -3.0f64..3.0,
    ) {
        let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64).collect();
        let truth: Vec<bool> = raw.iter().map(|(_, t)| *t).collect();
        prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
        let mapped: Vec<f64> = scores.iter().map(|s| (scale * s + shift).exp()).collect();
        let a = roc_points(&scores, &truth).unwrap();
        let b = roc_points(&mapped, &truth).unwrap();
        prop_assert_eq!(a.auc, b.auc);
        prop_assert_eq!(a.points, b.points);
    }

    #[test]
    fn f1_is_harmonic_mean(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
        let m = class_metrics(ClassCounts { tp, fp, fn_, tn });
        if let (Some(p), Some(r), Some(f1)) = (m.precision, m.recall(), m.f1) {
            if p + r > 0.0 {
                prop_assert!((f1 - 2.0 * p * r / (p + r)).abs() <= 1e-12);
            }
        }
        for v in [m.sensitivity, m.specificity, m.accuracy, m.precision, m.f1].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

fn cohort_labels() -> Vec<usize> {
    [(0, 714), (1, 713), (2, 539)]
        .iter()
        .flat_map(|&(c, n)| std::iter::repeat(c).take(n))
        .collect()
}

#[test]
fn stratified_folds_on_cohort_counts() {
    let mut labels = cohort_labels();
    labels.shuffle(&mut common::rng(3));
    let folds = stratified_kfold(&labels, 10, 42).unwrap();
    assert_eq!(folds.len(), 10);
    let mut seen = vec![false; labels.len()];
    for f in &folds {
        assert!(f.len() == 196 || f.len() == 197, "fold size {}", f.len());
        for &i in f {
            assert!(!seen[i], "index {i} in two folds");
            seen[i] = true;
        }
        let per_class: Vec<usize> = (0..3).map(|c| f.iter().filter(|&&i| labels[i] == c).count()).collect();
        assert!((71..=72).contains(&per_class[0]));
        assert!((71..=72).contains(&per_class[1]));
        assert!((53..=54).contains(&per_class[2]));
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(folds, stratified_kfold(&labels, 10, 42).unwrap());
    assert_ne!(folds, stratified_kfold(&labels, 10, 43).unwrap());
}

/// Three separable 2-D blobs, 20 points each, ids "s000".."s059".
fn blobs(seed: u64) -> (FeatureMatrix, Vec<usize>, Vec<String>) {
    let mut rng = common::rng(seed);
    let centers = [(0.0f32, 0.0f32), (5.0, 0.0), (0.0, 5.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..20 {
            let r = rng.gen_range(0.0f32..0.5);
            let t = rng.gen_range(0.0f32..std::f32::consts::TAU);
            rows.push([cx + r * t.cos(), cy + r * t.sin()]);
            labels.push(class);
        }
    }
    let ids = (0..rows.len()).map(|i| format!("s{i:03}")).collect();
    (FeatureMatrix::from_rows(&rows).unwrap(), labels, ids)
}

#[test]
fn separable_blobs_cross_validate_perfectly() {
    let (x, labels, ids) = blobs(7);
    let report = run_cv(&x, &labels, &ids, 3, &SmoParams::default(), 10, 42).unwrap();
    assert_eq!(report.folds.len(), 10);
    for f in &report.folds {
        assert_eq!(f.accuracy, 1.0, "fold {}", f.fold);
        assert_eq!(f.support, 6);
    }
    assert_eq!(report.pooled.trace(), 60);
    assert_eq!(report.pooled_accuracy, 1.0);
    assert_eq!(report.macro_auc, 1.0);
    for c in &report.classes {
        assert_eq!(c.roc.auc, 1.0);
        assert_eq!(c.support, 20);
    }
    let mean: f64 = report.folds.iter().map(|f| f.accuracy).sum::<f64>() / 10.0;
    assert_eq!(report.average.accuracy, mean);
}

#[test]
fn report_is_independent_of_sample_order() {
    let (x, labels, ids) = blobs(8);
    let mut perm: Vec<usize> = (0..labels.len()).collect();
    perm.shuffle(&mut common::rng(99));
    let px = x.select(&perm);
    let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
    let pi: Vec<String> = perm.iter().map(|&i| ids[i].clone()).collect();
    let params = SmoParams::default();
    let a = run_cv(&x, &labels, &ids, 3, &params, 5, 1).unwrap();
    let b = run_cv(&px, &pl, &pi, 3, &params, 5, 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn overlapping_classes_keep_pooled_identities() {
    let mut rng = common::rng(21);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..90 {
        let class = i % 3;
        rows.push([class as f32 + rng.gen_range(-1.5f32..1.5), rng.gen_range(-1.0f32..1.0)]);
        labels.push(class);
    }
    let ids: Vec<String> = (0..90).map(|i| format!("{i:02}")).collect();
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let report = run_cv(&x, &labels, &ids, 3, &SmoParams::default(), 10, 5).unwrap();
    assert_eq!(report.pooled_accuracy, report.pooled.trace() as f64 / report.pooled.total() as f64);
    assert_eq!(report.pooled.total(), 90);
    for c in &report.classes {
        let k = c.metrics.counts;
        assert_eq!(k.tp + k.fp + k.fn_ + k.tn, 90);
    }
    let mut merged = ConfusionMatrix::new(3);
    for f in &report.folds {
        merged.merge(&f.confusion).unwrap();
        for v in [f.precision, f.recall, f.f1].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert_eq!(merged, report.pooled);
    let correct = report.predictions.iter().filter(|p| p.truth == p.label).count() as u64;
    assert_eq!(correct, report.pooled.trace());
}

#[test]
fn training_failure_names_the_fold() {
    let (x, labels, ids) = blobs(9);
    let params = SmoParams {
        max_iter: 1,
        ..SmoParams::default()
    };
    let err = run_cv(&x, &labels, &ids, 3, &params, 10, 42).unwrap_err();
    assert!(matches!(err, EvalError::Training { fold: 1..=10, .. }), "{err}");
}

#[test]
fn duplicate_ids_rejected() {
    let (x, labels, mut ids) = blobs(10);
    ids[5] = ids[4].clone();
    assert!(matches!(
        run_cv(&x, &labels, &ids, 3, &SmoParams::default(), 10, 42),
        Err(EvalError::InvalidArgument(_))
    ));
}
