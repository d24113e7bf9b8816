//! Text renderings of a [`CvReport`]: CSV tables, an aligned confusion
//! matrix and an SVG of the per-class ROC curves.
//!
//! Every CSV starts with `# key=value` lines carrying the caller's
//! reproducibility header. Percentages use two decimals; undefined metrics
//! are written as `undefined`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ConfusionMatrix, CvReport, RocCurve};

/// Ordered `key=value` pairs written above every table.
pub type Header = [(String, String)];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn csv_string(header: &Header, rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "# {k}={v}");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is UTF-8"));
    out
}

fn name(names: &[String], class: usize) -> String {
    names.get(class).cloned().unwrap_or_else(|| format!("class_{class}"))
}

/// Per-fold table with the average row last.
pub fn fold_table_csv(report: &CvReport, header: &Header) -> String {
    let mut rows = vec![["Fold", "Support", "Accuracy", "Precision", "Recall", "F1-Score"]
        .map(String::from)
        .to_vec()];
    for f in &report.folds {
        rows.push(vec![
            f.fold.to_string(),
            f.support.to_string(),
            pct(Some(f.accuracy)),
            pct(f.precision),
            pct(f.recall),
            pct(f.f1),
        ]);
    }
    let a = &report.average;
    rows.push(vec![
        "Average".into(),
        format!("{:.1}", a.support),
        pct(Some(a.accuracy)),
        pct(a.precision),
        pct(a.recall),
        pct(a.f1),
    ]);
    csv_string(header, &rows)
}

/// Per-class table over the pooled out-of-fold predictions. The first
/// metric column is the class recall, which is what the per-class
/// "accuracy" of the original tables amounts to.
pub fn class_table_csv(report: &CvReport, names: &[String], header: &Header) -> String {
    let mut rows = vec![[
        "Class",
        "Support",
        "Class accuracy (recall)",
        "Precision",
        "Recall",
        "F1-Score",
        "Specificity",
        "AUC",
    ]
    .map(String::from)
    .to_vec()];
    for c in &report.classes {
        let m = &c.metrics;
        rows.push(vec![
            name(names, c.class),
            c.support.to_string(),
            pct(m.sensitivity),
            pct(m.precision),
            pct(m.sensitivity),
            pct(m.f1),
            pct(m.specificity),
            format!("{:.4}", c.roc.auc),
        ]);
    }
    rows.push(vec![
        "Average".into(),
        report.pooled.total().to_string(),
        pct(report.class_recall),
        pct(report.class_precision),
        pct(report.class_recall),
        pct(report.class_f1),
        String::new(),
        format!("{:.4}", report.macro_auc),
    ]);
    csv_string(header, &rows)
}

pub fn confusion_csv(cm: &ConfusionMatrix, names: &[String], header: &Header) -> String {
    let mut rows = vec![std::iter::once("true \\ predicted".to_string())
        .chain((0..cm.k()).map(|c| name(names, c)))
        .collect::<Vec<_>>()];
    for t in 0..cm.k() {
        rows.push(
            std::iter::once(name(names, t))
                .chain(cm.row(t).iter().map(u64::to_string))
                .collect(),
        );
    }
    csv_string(header, &rows)
}

/// Right-aligned grid, true classes down the side.
pub fn confusion_text(cm: &ConfusionMatrix, names: &[String]) -> String {
    let labels: Vec<String> = (0..cm.k()).map(|c| name(names, c)).collect();
    let side = labels.iter().map(String::len).max().unwrap_or(0).max("true".len());
    let cell = labels
        .iter()
        .map(String::len)
        .chain((0..cm.k()).flat_map(|t| cm.row(t).iter().map(|v| v.to_string().len())))
        .max()
        .unwrap_or(1);
    let mut out = String::new();
    let _ = write!(out, "{:>side$}", "true");
    for l in &labels {
        let _ = write!(out, "  {l:>cell$}");
    }
    out.push('\n');
    for (t, l) in labels.iter().enumerate() {
        let _ = write!(out, "{l:>side$}");
        for v in cm.row(t) {
            let _ = write!(out, "  {v:>cell$}");
        }
        out.push('\n');
    }
    out
}

pub fn roc_csv(curve: &RocCurve, header: &Header) -> String {
    let mut rows = vec![vec!["threshold".to_string(), "fpr".into(), "tpr".into()]];
    for (i, &(fpr, tpr)) in curve.points.iter().enumerate() {
        let t = if i == 0 {
            "inf".to_string()
        } else {
            format!("{:e}", curve.thresholds[i - 1])
        };
        rows.push(vec![t, format!("{fpr:.6}"), format!("{tpr:.6}")]);
    }
    csv_string(header, &rows)
}

pub fn predictions_csv(report: &CvReport, header: &Header) -> String {
    let mut rows = vec![["id", "fold", "truth", "predicted"]
        .map(String::from)
        .into_iter()
        .chain((0..report.num_classes).map(|c| format!("score_{c}")))
        .collect::<Vec<_>>()];
    for p in &report.predictions {
        rows.push(
            [p.id.clone(), p.fold.to_string(), p.truth.to_string(), p.label.to_string()]
                .into_iter()
                .chain(p.scores.iter().map(|s| format!("{s:e}")))
                .collect(),
        );
    }
    csv_string(header, &rows)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One polyline per class on the unit square, with the chance diagonal and
/// a legend carrying each class's AUC.
pub fn roc_svg(report: &CvReport, names: &[String]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |fpr: f64| PAD + fpr * SIZE;
    let y = |tpr: f64| PAD + (1.0 - tpr) * SIZE;
    let full = SIZE + 2.0 * PAD;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        PAD + SIZE / 2.0,
        full - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    for (i, c) in report.classes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .roc
            .points
            .iter()
            .map(|&(f, t)| format!("{:.2},{:.2}", x(f), y(t)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="roc" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = PAD + SIZE - 15.0 - 18.0 * (report.classes.len() - 1 - i) as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{} (AUC {:.4})</text>"#,
            PAD + SIZE * 0.45,
            name(names, c.class),
            c.roc.auc
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes every rendering plus `cv_report.json` into `dir` and returns the
/// paths in write order.
pub fn write_reports(report: &CvReport, names: &[String], header: &Header, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![
        ("cv_report.json".to_string(), serde_json::to_string_pretty(report).map_err(std::io::Error::other)? + "\n"),
        ("folds.csv".into(), fold_table_csv(report, header)),
        ("classes.csv".into(), class_table_csv(report, names, header)),
        ("confusion.csv".into(), confusion_csv(&report.pooled, names, header)),
        ("confusion.txt".into(), confusion_text(&report.pooled, names)),
        ("predictions.csv".into(), predictions_csv(report, header)),
    ];
    for c in &report.classes {
        files.push((format!("roc_{}.csv", name(names, c.class)), roc_csv(&c.roc, header)));
    }
    files.push(("roc.svg".into(), roc_svg(report, names)));
    let mut written = Vec::with_capacity(files.len());
    for (file, body) in files {
        let path = dir.join(file);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
