mod common;

use covsev_core::svm::*;
use proptest::prelude::*;
use rand::Rng;

/// Random instance with 2..=6 points in the plane and both labels present.
fn instance(seed: u64) -> (FeatureMatrix, Vec<f64>, SmoParams) {
    let mut rng = common::rng(seed);
    let n = rng.gen_range(2..=6);
    let rows: Vec<[f32; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let mut y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = [0.5, 1.0, 10.0][rng.gen_range(0..3)];
    let kernel = if rng.gen_bool(0.5) { Kernel::Linear } else { Kernel::Rbf { gamma: 0.5 } };
    let params = SmoParams {
        c,
        kernel,
        ..SmoParams::default()
    };
    (FeatureMatrix::from_rows(&rows).unwrap(), y, params)
}

#[test]
fn dual_objective_matches_brute_force_qp() {
    for seed in 0..30 {
        let (x, y, params) = instance(seed);
        let sol = smo_solve(&x, &y, &params).unwrap();
        let gram = gram_matrix(&params.kernel, &x);
        let (best, _) = common::dual_qp_oracle(&gram, &y, params.c);
        let got = dual_objective(&x, &y, &params.kernel, &sol.alphas);
        assert!(
            (got - best).abs() <= 1e-6,
            "seed {seed}: smo {got} vs oracle {best} (n={}, {params:?})",
            y.len()
        );
        let worst = kkt_residuals(&x, &y, &params, &sol).into_iter().fold(0.0, f64::max);
        assert!(worst <= params.tol, "seed {seed}: KKT residual {worst}");
    }
}

#[test]
fn separable_blobs_train_perfectly() {
    let mut rng = common::rng(11);
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
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let model = train_multiclass(&x, &labels, 3, &SmoParams::default()).unwrap();
    assert_eq!(model.num_classes(), 3);
    for (row, &label) in x.iter_rows().zip(&labels) {
        assert_eq!(model.predict(row).unwrap().label, label);
    }
    for (class, &(cx, cy)) in centers.iter().enumerate() {
        let p = model.predict(&[cx, cy]).unwrap();
        assert_eq!(p.label, class);
        for (other, &s) in p.scores.iter().enumerate() {
            if other != class {
                assert!(p.scores[class] > s);
            }
        }
        assert_eq!(model.predict(&[cx, cy]).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dual_feasibility_and_kkt(seed in 0u64..10_000) {
        let (x, y, params) = instance(seed);
        let sol = smo_solve(&x, &y, &params).unwrap();
        let balance: f64 = sol.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-9);
        prop_assert!(sol.alphas.iter().all(|&a| a >= 0.0 && a <= params.c));
        let worst = kkt_residuals(&x, &y, &params, &sol).into_iter().fold(0.0, f64::max);
        prop_assert!(worst <= params.tol);
        let model = smo_train(&x, &y, &params).unwrap();
        let stored_ok = model.dual_coeffs.iter().all(|c| c.abs() > 0.0 && c.abs() <= params.c);
        prop_assert!(stored_ok);
    }

    #[test]
    fn separable_margin_with_large_c(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..8);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push([label as f32 * rng.gen_range(1.0f32..3.0), rng.gen_range(-2.0f32..2.0)]);
            y.push(label);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let params = SmoParams { c: 1e4, tol: 1e-9, ..SmoParams::default() };
        let model = smo_train(&x, &y, &params).unwrap();
        for (row, &label) in x.iter_rows().zip(&y) {
            prop_assert!(label * model.decision_value(row).unwrap() >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn argmax_invariant_under_monotone_rescaling(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, scale in 0.01f64..100.0, shift in -10.0f64..10.0) {
        let base = [a, b, c];
        let mapped: Vec<f64> = base.iter().map(|v| (scale * v + shift).exp()).collect();
        let pick = |s: &[f64]| (0..3).fold(0, |best, i| if s[i] > s[best] { i } else { best });
        prop_assert_eq!(pick(&base), pick(&mapped));
    }
}

#[test]
fn training_is_deterministic() {
    let (x, _, params) = instance(3);
    let labels: Vec<usize> = (0..x.rows()).map(|i| i % 2).collect();
    if x.rows() >= 4 {
        let a = train_multiclass(&x, &labels, 2, &params).unwrap();
        let b = train_multiclass(&x, &labels, 2, &params).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn model_file_roundtrip_preserves_decisions() {
    let mut rng = common::rng(5);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for class in 0..3 {
        for _ in 0..15 {
            rows.push([class as f32 * 3.0 + rng.gen_range(-0.5f32..0.5), rng.gen_range(-1.0f32..1.0)]);
            labels.push(class);
        }
    }
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let model = train_multiclass(&x, &labels, 3, &SmoParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blob.svmm");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    for _ in 0..100 {
        let probe = [rng.gen_range(-2.0f32..8.0), rng.gen_range(-2.0f32..2.0)];
        assert_eq!(model.predict(&probe).unwrap(), back.predict(&probe).unwrap());
    }
}
