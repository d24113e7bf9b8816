//! `covsev`: preprocess chest CT slices, embed them with a VGG-16 base,
//! train one-vs-rest SVMs and cross-validate.

mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "covsev", version, about = "Three-class chest CT severity pipeline")]
struct Cli {
    /// Flat `key = value` config file. Keys are the long flag names
    /// without the leading dashes; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the preprocessed image of every dataset entry as PGM.
    Preprocess {
        #[command(flatten)]
        io: DataArgs,
        #[command(flatten)]
        prep: PrepArgs,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embed a dataset into an FSTR feature cache.
    Extract {
        #[command(flatten)]
        io: DataArgs,
        #[command(flatten)]
        prep: PrepArgs,
        #[command(flatten)]
        ext: ExtractorArgs,
        /// Feature cache to create or reuse.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Train a one-vs-rest SVM on a feature cache and save it as SVMM.
    Train {
        /// Feature cache written by `extract`.
        #[arg(long)]
        features: Option<PathBuf>,
        #[command(flatten)]
        svm: SvmArgs,
        /// Output model file.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation with CSV, text and SVG reports.
    Crossval {
        /// Feature cache to evaluate. Without it, `--data` is extracted
        /// into `<out>/features.fstr` first.
        #[arg(long)]
        features: Option<PathBuf>,
        #[command(flatten)]
        io: DataArgs,
        #[command(flatten)]
        prep: PrepArgs,
        #[command(flatten)]
        ext: ExtractorArgs,
        #[command(flatten)]
        svm: SvmArgs,
        #[command(flatten)]
        cv: CvArgs,
        /// Report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Classify images with a trained model; prints the label and the three
    /// one-vs-rest scores per image.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        prep: PrepArgs,
        #[command(flatten)]
        ext: ExtractorArgs,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Re-render the reports of a `crossval` run from its `cv_report.json`.
    Report {
        /// Directory written by `crossval`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic three-class phantom dataset.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        per_class: Option<usize>,
        /// Image side in pixels.
        #[arg(long)]
        side: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset: a directory with one subdirectory per class, or a CSV with
    /// `path` and `label` columns.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PrepArgs {
    /// Square network input side.
    #[arg(long)]
    target_size: Option<usize>,
    #[arg(long)]
    median_radius: Option<usize>,
    /// CLAHE tile grid as RxC, e.g. 8x8.
    #[arg(long)]
    clahe_grid: Option<String>,
    /// CLAHE clip limit as a multiple of the mean bin count.
    #[arg(long)]
    clip_factor: Option<f64>,
    #[arg(long)]
    no_clahe: bool,
}

#[derive(Debug, Args)]
struct ExtractorArgs {
    /// VGGW weight file for the CNN extractor.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// `cnn` (default) or `downsample`.
    #[arg(long)]
    extractor: Option<String>,
    /// Grid side of the downsample extractor.
    #[arg(long)]
    downsample_side: Option<usize>,
    /// CNN feature head: `flatten` (default) or `gap`.
    #[arg(long)]
    head: Option<String>,
}

#[derive(Debug, Args)]
struct SvmArgs {
    /// Box constraint.
    #[arg(long)]
    c: Option<f64>,
    /// `linear` (default) or `rbf`.
    #[arg(long)]
    kernel: Option<String>,
    /// RBF width; defaults to 1 / feature dimension.
    #[arg(long)]
    gamma: Option<f64>,
    /// KKT tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("covsev: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
