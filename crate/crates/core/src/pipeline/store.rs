//! FSTR feature cache, little-endian:
//!
//! ```text
//! magic "FSTR" | dim u32 | row count u32 | fingerprint [u8; 32]
//! per row: id_len u16 | id (UTF-8) | label u8 | f32 x dim
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{io_err, PipelineError, Result};
use crate::svm::FeatureMatrix;

const MAGIC: &[u8; 4] = b"FSTR";
const HEADER_LEN: usize = 4 + 4 + 4 + 32;

#[derive(Debug, Clone, PartialEq)]
pub struct StoreRow {
    pub id: String,
    pub label: u8,
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreHeader {
    pub dim: usize,
    pub rows: usize,
    pub fingerprint: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub dim: usize,
    pub fingerprint: [u8; 32],
    pub rows: Vec<StoreRow>,
}

impl FeatureStore {
    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint)
    }

    /// Features, labels and ids in store order.
    pub fn to_matrix(&self) -> (FeatureMatrix, Vec<usize>, Vec<String>) {
        let mut data = Vec::with_capacity(self.rows.len() * self.dim);
        for r in &self.rows {
            data.extend_from_slice(&r.features);
        }
        let x = FeatureMatrix::new(self.rows.len(), self.dim, data).expect("rows share the store dimension");
        let labels = self.rows.iter().map(|r| r.label as usize).collect();
        let ids = self.rows.iter().map(|r| r.id.clone()).collect();
        (x, labels, ids)
    }
}

/// Appends rows to a new store file. The row count in the header is
/// patched by [`StoreWriter::finish`].
pub struct StoreWriter {
    out: BufWriter<File>,
    path: PathBuf,
    dim: usize,
    rows: u32,
}

impl StoreWriter {
    pub fn create(path: &Path, dim: usize, fingerprint: [u8; 32]) -> Result<Self> {
        let dim32 = u32::try_from(dim).map_err(|_| PipelineError::InvalidArgument(format!("dimension {dim} too large")))?;
        let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&dim32.to_le_bytes());
        header.extend_from_slice(&0u32.to_le_bytes());
        header.extend_from_slice(&fingerprint);
        out.write_all(&header).map_err(io_err(path))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
            dim,
            rows: 0,
        })
    }

    pub fn append(&mut self, id: &str, label: u8, features: &[f32]) -> Result<()> {
        if features.len() != self.dim {
            return Err(self.error(format!("row {id} has {} features, store has {}", features.len(), self.dim)));
        }
        let id_len = u16::try_from(id.len()).map_err(|_| self.error(format!("id {id} longer than 65535 bytes")))?;
        let mut buf = Vec::with_capacity(3 + id.len() + 4 * features.len());
        buf.extend_from_slice(&id_len.to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        buf.push(label);
        for v in features {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.out.write_all(&buf).map_err(io_err(&self.path))?;
        self.rows = self.rows.checked_add(1).ok_or_else(|| self.error("too many rows".into()))?;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows as usize
    }

    pub fn finish(mut self) -> Result<()> {
        let path = self.path.clone();
        self.out.seek(SeekFrom::Start(8)).map_err(io_err(&path))?;
        self.out.write_all(&self.rows.to_le_bytes()).map_err(io_err(&path))?;
        let file = self.out.into_inner().map_err(|e| PipelineError::Io {
            path: path.clone(),
            source: e.into_error(),
        })?;
        file.sync_all().map_err(io_err(&path))
    }

    fn error(&self, reason: String) -> PipelineError {
        PipelineError::Store {
            path: self.path.clone(),
            reason,
        }
    }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<StoreHeader> {
    let err = |reason: &str| PipelineError::Store {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(err("not an FSTR file"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(err("truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    Ok(StoreHeader {
        dim: u32_at(4),
        rows: u32_at(8),
        fingerprint: bytes[12..44].try_into().unwrap(),
    })
}

/// Reads only the fixed-size header.
pub fn read_store_header(path: &Path) -> Result<StoreHeader> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    File::open(path)
        .map_err(io_err(path))?
        .take(HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(io_err(path))?;
    parse_header(&buf, path)
}

pub fn read_store(path: &Path) -> Result<FeatureStore> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode(&bytes, path)
}

pub(crate) fn decode(bytes: &[u8], path: &Path) -> Result<FeatureStore> {
    let header = parse_header(bytes, path)?;
    let err = |reason: String| PipelineError::Store {
        path: path.to_path_buf(),
        reason,
    };
    let mut pos = HEADER_LEN;
    let mut take = |n: usize, row: usize| -> Result<&[u8]> {
        let end = pos
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| err(format!("truncated in row {row}")))?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let mut rows = Vec::with_capacity(header.rows.min(bytes.len() / 4));
    for r in 0..header.rows {
        let id_len = u16::from_le_bytes(take(2, r)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(id_len, r)?)
            .map_err(|_| err(format!("row {r} id is not UTF-8")))?
            .to_string();
        let label = take(1, r)?[0];
        let n = header.dim.checked_mul(4).ok_or_else(|| err("dimension overflows".into()))?;
        let features = take(n, r)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        rows.push(StoreRow { id, label, features });
    }
    if pos != bytes.len() {
        return Err(err(format!("{} bytes after the last row", bytes.len() - pos)));
    }
    Ok(FeatureStore {
        dim: header.dim,
        fingerprint: header.fingerprint,
        rows,
    })
}
