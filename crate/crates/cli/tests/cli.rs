use std::path::Path;
use std::process::{Command, Output};

use covsev_core::pipeline::StoreWriter;

fn covsev(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covsev"))
        .args(args)
        .current_dir(cwd)
        .env_remove("COVSEV_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: &str = "extractor = downsample\ndownsample_side = 8\ntarget-size = 64\nfolds = 5\n";

/// A 30-per-class synthetic dataset plus a config for fast runs.
fn small_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = covsev(&["synth", "--out", "data", "--per-class", "30", "--side", "64", "--seed", "3"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    std::fs::write(dir.path().join("run.cfg"), SMALL).unwrap();
    dir
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().contains(".fstr"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn crossval_is_reproducible_across_thread_counts() {
    let dir = small_workspace();
    for (out, threads) in [("r1", "1"), ("r2", "3")] {
        let run = covsev(
            &["--config", "run.cfg", "crossval", "--data", "data", "--out", out, "--seed", "42", "--threads", threads],
            dir.path(),
        );
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        assert!(stdout(&run).contains("5-fold CV"));
    }
    let (a, b) = (report_files(&dir.path().join("r1")), report_files(&dir.path().join("r2")));
    assert_eq!(a.len(), 11);
    assert_eq!(a, b);
    let folds = String::from_utf8(a.iter().find(|(n, _)| n == "folds.csv").unwrap().1.clone()).unwrap();
    assert!(folds.contains("# seed=42"));
    assert!(folds.contains("# extractor=area_downsample side=8"));
    assert!(folds.contains("# features_fingerprint="));
}

#[test]
fn train_then_predict() {
    let dir = small_workspace();
    let run = covsev(&["--config", "run.cfg", "extract", "--data", "data", "--cache", "f.fstr"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let again = covsev(&["--config", "run.cfg", "extract", "--data", "data", "--cache", "f.fstr"], dir.path());
    assert!(stdout(&again).contains("cache hit"));

    let run = covsev(&["train", "--features", "f.fstr", "--model", "m.svmm"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let provenance = std::fs::read_to_string(dir.path().join("m.svmm.run.txt")).unwrap();
    assert!(provenance.contains("svm = C=1 kernel=linear"));

    let run = covsev(
        &["--config", "run.cfg", "predict", "--model", "m.svmm", "data/non_covid/img_0000.pgm", "data/severe/img_0000.pgm"],
        dir.path(),
    );
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let text = stdout(&run);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("data/")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].split('\t').nth(1) == Some("non_covid"), "{text}");
    assert!(rows[1].split('\t').nth(1) == Some("severe"), "{text}");
    assert_eq!(rows[0].split('\t').count(), 5);
    assert!(text.lines().any(|l| l.starts_with("# extractor=")));
}

#[test]
fn predict_on_a_non_image_exits_2_naming_the_file() {
    let dir = small_workspace();
    covsev(&["--config", "run.cfg", "extract", "--data", "data", "--cache", "f.fstr"], dir.path());
    covsev(&["train", "--features", "f.fstr", "--model", "m.svmm"], dir.path());
    std::fs::write(dir.path().join("notes.png"), "not an image").unwrap();
    let run = covsev(&["--config", "run.cfg", "predict", "--model", "m.svmm", "notes.png"], dir.path());
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("notes.png"), "{}", stderr(&run));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&covsev(&["crossval", "--bogus"], dir.path())), 1);
    assert_eq!(code(&covsev(&["crossval"], dir.path())), 1);
    assert_eq!(code(&covsev(&["train", "--features", "x", "--model", "y", "--c", "-1"], dir.path())), 1);
    std::fs::write(dir.path().join("bad.cfg"), "clip_factr = 2\n").unwrap();
    let run = covsev(&["--config", "bad.cfg", "synth", "--out", "d"], dir.path());
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("clip_factr"));
    assert_eq!(code(&covsev(&["--help"], dir.path())), 0);
}

#[test]
fn data_and_training_failures() {
    let dir = small_workspace();
    let missing = covsev(&["train", "--features", "nope.fstr", "--model", "m.svmm"], dir.path());
    assert_eq!(code(&missing), 2);
    covsev(&["--config", "run.cfg", "extract", "--data", "data", "--cache", "f.fstr"], dir.path());
    let capped = covsev(&["train", "--features", "f.fstr", "--model", "m.svmm", "--max-iter", "2"], dir.path());
    assert_eq!(code(&capped), 3, "{}", stderr(&capped));
}

/// Three separable blobs written straight to a feature cache.
fn blob_store(path: &Path) {
    let mut w = StoreWriter::create(path, 2, [7; 32]).unwrap();
    let centers = [(0.0f32, 0.0f32), (6.0, 0.0), (0.0, 6.0)];
    for (label, &(cx, cy)) in centers.iter().enumerate() {
        for i in 0..20 {
            let t = i as f32 * 0.9;
            let r = 0.1 + 0.02 * i as f32;
            w.append(&format!("c{label}_{i:02}"), label as u8, &[cx + r * t.cos(), cy + r * t.sin()])
                .unwrap();
        }
    }
    w.finish().unwrap();
}

#[test]
fn report_rerenders_the_blob_run() {
    let dir = tempfile::tempdir().unwrap();
    blob_store(&dir.path().join("blobs.fstr"));
    let run = covsev(&["crossval", "--features", "blobs.fstr", "--out", "cv"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let original = report_files(&dir.path().join("cv"));

    let run = covsev(&["report", "--input", "cv", "--out", "again"], dir.path());
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    assert_eq!(report_files(&dir.path().join("again")), original);

    let svg = std::fs::read_to_string(dir.path().join("again/roc.svg")).unwrap();
    assert_eq!(svg.matches("class=\"roc\"").count(), 3);
    assert_eq!(svg.matches("AUC 1.0000").count(), 3);
}

#[test]
fn preprocess_writes_one_pgm_per_image() {
    let dir = small_workspace();
    let run = covsev(
        &["preprocess", "--data", "data", "--out", "pre", "--target-size", "32", "--clahe-grid", "4x4"],
        dir.path(),
    );
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let img = covsev_core::imaging::read_image(&dir.path().join("pre/severe/img_0007.pgm")).unwrap();
    assert_eq!(img.dims(), (32, 32));
    let pgms = std::fs::read_dir(dir.path().join("pre/non_severe")).unwrap().count();
    assert_eq!(pgms, 30);
    let provenance = std::fs::read_to_string(dir.path().join("pre/run.txt")).unwrap();
    assert!(provenance.contains("preprocess = target=32x32 median_radius=1 clahe=4x4 clip=2"));
}
