use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, Class, PipelineError, Result};

/// File extensions ingest accepts (compared case-insensitively).
const IMAGE_EXTENSIONS: [&str; 4] = ["pgm", "png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Stable sample id: `class/file` for directory datasets, the path as
    /// written for CSV manifests.
    pub id: String,
    pub path: PathBuf,
    pub class: Class,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub source: String,
    /// Files found but not usable, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn from_entries(entries: Vec<ManifestEntry>, source: impl Into<String>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut paths = HashSet::new();
        for e in &entries {
            if !ids.insert(&e.id) || !paths.insert(&e.path) {
                return Err(PipelineError::InvalidArgument(format!("duplicate manifest entry {}", e.id)));
            }
        }
        Ok(Self {
            entries,
            source: source.into(),
            skipped: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in &self.entries {
            c[e.class.label()] += 1;
        }
        c
    }

    /// Per-class counts and the total, one line each.
    pub fn count_table(&self) -> String {
        let mut out = String::new();
        let counts = self.counts();
        for class in Class::ALL {
            let _ = writeln!(out, "{:<12}{:>7}", class.name(), counts[class.label()]);
        }
        let _ = writeln!(out, "{:<12}{:>7}", "total", self.len());
        out
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Reason a listed file cannot be used, if any.
fn unusable(path: &Path) -> Option<String> {
    if !has_image_extension(path) {
        return Some("unsupported file extension".into());
    }
    match std::fs::File::open(path) {
        Ok(_) => None,
        Err(e) => Some(e.to_string()),
    }
}

/// Reads a dataset from a directory `<root>/{non_covid,non_severe,severe}/*`
/// or from a CSV manifest with `path` and `label` columns (paths relative to
/// the CSV's directory).
///
/// Unusable files are skipped and listed; a missing or empty class is a
/// warning; a dataset with no usable image is an error.
pub fn ingest(root: &Path) -> Result<DatasetManifest> {
    let meta = std::fs::metadata(root).map_err(io_err(root))?;
    let manifest = if meta.is_dir() {
        ingest_dir(root)?
    } else {
        ingest_csv(root)?
    };
    if manifest.is_empty() {
        return Err(PipelineError::EmptyDataset(root.to_path_buf()));
    }
    Ok(manifest)
}

fn ingest_dir(root: &Path) -> Result<DatasetManifest> {
    let mut m = DatasetManifest {
        source: format!("directory {}", root.display()),
        ..Default::default()
    };
    for class in Class::ALL {
        let dir = root.join(class.name());
        if !dir.is_dir() {
            m.warnings.push(format!("class directory {} is missing", dir.display()));
            continue;
        }
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let path = entry.path();
            if path.is_file() {
                files.push((entry.file_name().to_string_lossy().into_owned(), path));
            }
        }
        files.sort();
        let before = m.entries.len();
        for (name, path) in files {
            if name.starts_with('.') {
                continue;
            }
            match unusable(&path) {
                Some(reason) => m.skipped.push((path, reason)),
                None => m.entries.push(ManifestEntry {
                    id: format!("{}/{name}", class.name()),
                    path,
                    class,
                }),
            }
        }
        if m.entries.len() == before {
            m.warnings.push(format!("class directory {} holds no usable images", dir.display()));
        }
    }
    Ok(m)
}

fn ingest_csv(path: &Path) -> Result<DatasetManifest> {
    let base = path.parent().unwrap_or(Path::new("."));
    let parse_err = |line: usize, reason: String| PipelineError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(path_col), Some(label_col)) = (column("path"), column("label")) else {
        return Err(parse_err(1, "header must name `path` and `label` columns".into()));
    };
    let mut m = DatasetManifest {
        source: format!("manifest {}", path.display()),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw = record.get(path_col).unwrap_or("");
        if raw.is_empty() {
            return Err(parse_err(line, "empty path".into()));
        }
        let class: Class = record
            .get(label_col)
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(line, e))?;
        if !seen.insert(raw.to_string()) {
            return Err(parse_err(line, format!("path {raw} listed twice")));
        }
        let file = base.join(raw);
        match unusable(&file) {
            Some(reason) => m.skipped.push((file, reason)),
            None => m.entries.push(ManifestEntry {
                id: raw.to_string(),
                path: file,
                class,
            }),
        }
    }
    for class in Class::ALL {
        if m.counts()[class.label()] == 0 {
            m.warnings.push(format!("class {class} has no usable images"));
        }
    }
    Ok(m)
}
