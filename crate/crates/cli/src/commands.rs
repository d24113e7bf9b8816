use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};

use covsev_core::eval::report::write_reports;
use covsev_core::eval::{run_cv, CvReport};
use covsev_core::imaging::{preprocess, read_image, write_pgm, PreprocessParams};
use covsev_core::pipeline::config::Config;
use covsev_core::pipeline::{
    extract_all, generate_synthetic, ingest, read_store, Class, DatasetManifest, ExtractOutcome, Extractor,
};
use covsev_core::svm::{load_model, save_model, train_multiclass};

use crate::error::{io_error, CliError};
use crate::settings::{describe_preprocess, describe_smo, Settings};
use crate::{Cli, Command};

/// Name of the reproducibility file written next to every output.
const RUN_FILE: &str = "run.txt";

/// Reproducibility block: sorted `key -> value`, written as report headers
/// and as `key = value` run files.
type Provenance = BTreeMap<String, String>;

fn provenance(command: &str) -> Provenance {
    let mut p = Provenance::new();
    p.insert("tool".into(), format!("covsev {}", env!("CARGO_PKG_VERSION")));
    p.insert("command".into(), command.into());
    p
}

fn write_run_file(path: &Path, p: &Provenance) -> Result<(), CliError> {
    let text: String = p.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    std::fs::write(path, text).map_err(io_error(path))
}

fn read_run_file(path: &Path) -> Result<Provenance, CliError> {
    let cfg = Config::load(path).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(cfg.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

/// `<file>.run.txt` for a file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.txt");
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

fn load_manifest(data: &Path) -> Result<DatasetManifest, CliError> {
    let manifest = ingest(data)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for (path, reason) in &manifest.skipped {
        eprintln!("skipped {}: {reason}", path.display());
    }
    let [a, b, c] = manifest.counts();
    eprintln!("{} images: {a} non_covid, {b} non_severe, {c} severe", manifest.len());
    Ok(manifest)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Preprocess { io, prep, out } => {
            let data: PathBuf = s.require(io.data, "data")?;
            let out: PathBuf = s.require(out, "out")?;
            cmd_preprocess(&data, &s.preprocess(&prep)?, &out)
        }
        Command::Extract {
            io,
            prep,
            ext,
            cache,
            threads,
        } => {
            let data: PathBuf = s.require(io.data, "data")?;
            let cache: PathBuf = s.require(cache, "cache")?;
            let params = s.preprocess(&prep)?;
            let extractor = s.extractor(&ext)?;
            let threads = s.get(threads, "threads")?;
            let manifest = load_manifest(&data)?;
            let (outcome, p) = extract(&manifest, &params, &extractor, &cache, threads)?;
            write_run_file(&sidecar(&cache), &p)?;
            println!(
                "{} rows of dim {} in {}{}",
                outcome.store.rows.len(),
                outcome.store.dim,
                cache.display(),
                if outcome.cache_hit { " (cache hit)" } else { "" }
            );
            Ok(())
        }
        Command::Train { features, svm, model } => {
            let features: PathBuf = s.require(features, "features")?;
            let model_path: PathBuf = s.require(model, "model")?;
            let store = read_store(&features)?;
            let (x, labels, _) = store.to_matrix();
            let params = s.smo(&svm, x.dim())?;
            let model = train_multiclass(&x, &labels, Class::ALL.len(), &params)?;
            save_model(&model, &model_path)?;
            let mut p = provenance("train");
            p.insert("features_fingerprint".into(), store.fingerprint_hex());
            p.insert("samples".into(), x.rows().to_string());
            p.insert("dim".into(), x.dim().to_string());
            p.insert("svm".into(), describe_smo(&params));
            inherit(&mut p, &sidecar(&features));
            write_run_file(&sidecar(&model_path), &p)?;
            println!("trained on {} samples, model written to {}", x.rows(), model_path.display());
            Ok(())
        }
        Command::Crossval {
            features,
            io,
            prep,
            ext,
            svm,
            cv,
            out,
            threads,
        } => {
            let out: PathBuf = s.require(out, "out")?;
            let threads: Option<usize> = s.get(threads, "threads")?;
            let folds = s.or(cv.folds, "folds", 10usize)?;
            let seed = s.or(cv.seed, "seed", 42u64)?;
            create_dir(&out)?;
            let mut p = provenance("crossval");
            let store = match s.get(features, "features")? {
                Some(path) => {
                    inherit(&mut p, &sidecar(&path));
                    read_store(&path)?
                }
                None => {
                    let data: PathBuf = s.require(io.data, "data").map_err(|_| {
                        CliError::Usage("crossval needs --features or --data".into())
                    })?;
                    let manifest = load_manifest(&data)?;
                    let cache = out.join("features.fstr");
                    let (outcome, extracted) =
                        extract(&manifest, &s.preprocess(&prep)?, &s.extractor(&ext)?, &cache, threads)?;
                    write_run_file(&sidecar(&cache), &extracted)?;
                    inherit(&mut p, &sidecar(&cache));
                    outcome.store
                }
            };
            let (x, labels, ids) = store.to_matrix();
            let params = s.smo(&svm, x.dim())?;
            p.insert("features_fingerprint".into(), store.fingerprint_hex());
            p.insert("samples".into(), x.rows().to_string());
            p.insert("dim".into(), x.dim().to_string());
            p.insert("svm".into(), describe_smo(&params));
            p.insert("folds".into(), folds.to_string());
            p.insert("seed".into(), seed.to_string());
            p.insert("command".into(), "crossval".into());
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.or_else(covsev_core::pipeline::worker_threads).unwrap_or(0))
                .build()
                .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
            let report = pool.install(|| run_cv(&x, &labels, &ids, Class::ALL.len(), &params, folds, seed))?;
            render(&report, &p, &out)?;
            print_summary(&report);
            Ok(())
        }
        Command::Predict {
            model,
            prep,
            ext,
            images,
        } => {
            let model_path: PathBuf = s.require(model, "model")?;
            let model = load_model(&model_path)?;
            let params = s.preprocess(&prep)?;
            let extractor = s.extractor(&ext)?;
            let mut p = provenance("predict");
            p.insert("model".into(), model_path.display().to_string());
            p.insert("preprocess".into(), describe_preprocess(&params));
            p.insert("extractor".into(), extractor.describe());
            for (k, v) in &p {
                println!("# {k}={v}");
            }
            println!("path\tlabel\t{}", Class::names().join("\t"));
            let mut failed = Vec::new();
            for path in &images {
                match classify(path, &params, &extractor, &model) {
                    Ok((label, scores)) => {
                        let scores: Vec<String> = scores.iter().map(|v| format!("{v:.6}")).collect();
                        println!("{}\t{label}\t{}", path.display(), scores.join("\t"));
                    }
                    Err(e) => {
                        eprintln!("covsev: {}: {e}", path.display());
                        failed.push(path.display().to_string());
                    }
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Data(format!(
                    "{} of {} images could not be classified: {}",
                    failed.len(),
                    images.len(),
                    failed.join(", ")
                )))
            }
        }
        Command::Report { input, out } => {
            let input: PathBuf = s.require(input, "input")?;
            let out = s.get(out, "out")?.unwrap_or_else(|| input.clone());
            let json = input.join("cv_report.json");
            let text = std::fs::read_to_string(&json).map_err(io_error(&json))?;
            let report: CvReport = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", json.display())))?;
            let run = input.join(RUN_FILE);
            let p = if run.exists() { read_run_file(&run)? } else { provenance("crossval") };
            create_dir(&out)?;
            render(&report, &p, &out)?;
            print_summary(&report);
            Ok(())
        }
        Command::Synth {
            out,
            per_class,
            side,
            seed,
        } => {
            let out: PathBuf = s.require(out, "out")?;
            let per_class = s.or(per_class, "per-class", 200usize)?;
            let side = s.or(side, "side", 128usize)?;
            let seed = s.or(seed, "seed", 42u64)?;
            if per_class == 0 || side < 16 {
                return Err(CliError::Usage("synth needs --per-class >= 1 and --side >= 16".into()));
            }
            let manifest = generate_synthetic(&out, per_class, side, seed)?;
            let mut p = provenance("synth");
            p.insert("per_class".into(), per_class.to_string());
            p.insert("side".into(), side.to_string());
            p.insert("seed".into(), seed.to_string());
            write_run_file(&out.join(RUN_FILE), &p)?;
            println!("{} images written to {}", manifest.len(), out.display());
            Ok(())
        }
    }
}

/// Copies the dataset and extraction keys of an upstream run file.
fn inherit(p: &mut Provenance, run_file: &Path) {
    if let Ok(upstream) = read_run_file(run_file) {
        for key in ["dataset", "extractor", "preprocess"] {
            if let Some(v) = upstream.get(key) {
                p.insert(key.into(), v.clone());
            }
        }
    }
}

fn extract(
    manifest: &DatasetManifest,
    params: &PreprocessParams,
    extractor: &Extractor,
    cache: &Path,
    threads: Option<usize>,
) -> Result<(ExtractOutcome, Provenance), CliError> {
    let outcome = extract_all(manifest, params, extractor, cache, threads)?;
    for f in &outcome.failures {
        eprintln!("failed {}: {}", f.path.display(), f.reason);
    }
    let mut p = provenance("extract");
    p.insert("dataset".into(), manifest.source.clone());
    p.insert("preprocess".into(), describe_preprocess(params));
    p.insert("extractor".into(), extractor.describe());
    p.insert("features_fingerprint".into(), outcome.store.fingerprint_hex());
    p.insert("failures".into(), outcome.failures.len().to_string());
    Ok((outcome, p))
}

fn render(report: &CvReport, p: &Provenance, out: &Path) -> Result<(), CliError> {
    let header: Vec<(String, String)> = p.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    write_reports(report, &Class::names(), &header, out).map_err(io_error(out))?;
    write_run_file(&out.join(RUN_FILE), p)
}

fn print_summary(report: &CvReport) {
    let pct = |v: Option<f64>| v.map_or("undefined".into(), |v| format!("{:.2}%", 100.0 * v));
    println!(
        "{}-fold CV: pooled accuracy {:.2}%, mean fold accuracy {:.2}%, mean fold F1 {}, macro AUC {:.4}",
        report.k,
        100.0 * report.pooled_accuracy,
        100.0 * report.average.accuracy,
        pct(report.average.f1),
        report.macro_auc
    );
    print!(
        "{}",
        covsev_core::eval::report::confusion_text(&report.pooled, &Class::names())
    );
}

fn classify(
    path: &Path,
    params: &PreprocessParams,
    extractor: &Extractor,
    model: &covsev_core::svm::MulticlassSvm,
) -> Result<(Class, Vec<f64>), CliError> {
    let img = read_image(path)?;
    let features = extractor.embed(&preprocess(&img, params)?)?;
    if features.len() != model.dim() {
        return Err(CliError::Data(format!(
            "features have dimension {} but the model expects {}; use the preprocessing and extractor settings it was trained with",
            features.len(),
            model.dim()
        )));
    }
    let pred = model.predict(&features)?;
    let class = Class::from_label(pred.label)
        .ok_or_else(|| CliError::Data(format!("model has an unknown class {}", pred.label)))?;
    Ok((class, pred.scores))
}

fn cmd_preprocess(data: &Path, params: &PreprocessParams, out: &Path) -> Result<(), CliError> {
    let manifest = load_manifest(data)?;
    create_dir(out)?;
    let mut failed = 0;
    for e in &manifest.entries {
        let target = out.join(output_name(&e.id));
        let result = read_image(&e.path)
            .and_then(|img| preprocess(&img, params))
            .and_then(|img| {
                if let Some(dir) = target.parent() {
                    std::fs::create_dir_all(dir).map_err(|source| covsev_core::imaging::ImagingError::Io {
                        path: dir.to_path_buf(),
                        source,
                    })?;
                }
                write_pgm(&img, &target)
            });
        if let Err(err) = result {
            eprintln!("failed {}: {err}", e.path.display());
            failed += 1;
        }
    }
    if failed * 10 > manifest.len() {
        return Err(CliError::Data(format!(
            "{failed} of {} images failed, above the 10% limit",
            manifest.len()
        )));
    }
    let mut p = provenance("preprocess");
    p.insert("dataset".into(), manifest.source.clone());
    p.insert("preprocess".into(), describe_preprocess(params));
    p.insert("failures".into(), failed.to_string());
    write_run_file(&out.join(RUN_FILE), &p)?;
    println!("{} images written to {}", manifest.len() - failed, out.display());
    Ok(())
}

/// Relative output path for a sample id with the extension set to `pgm`;
/// parent and root components are dropped so outputs stay under `out`.
fn output_name(id: &str) -> PathBuf {
    let mut rel: PathBuf = Path::new(id)
        .components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s),
            _ => None,
        })
        .collect();
    rel.set_extension("pgm");
    rel
}
