//! SVMM model files, little-endian:
//!
//! ```text
//! magic "SVMM" | version u32 | kernel tag u8 (0 linear, 1 rbf) | gamma f64
//! | C f64 | class count u8 | dim u32 | mean f64 x dim | std f64 x dim
//! per class: sv_count u32 | dim u32 | coeffs f64 x sv_count | bias f64
//!            | svs f32 x (sv_count * dim)
//! ```

use std::path::Path;

use super::{BinarySvm, FeatureMatrix, Kernel, MulticlassSvm, Result, Standardizer, SvmError};

const MAGIC: &[u8; 4] = b"SVMM";
const VERSION: u32 = 1;

pub fn save_model(model: &MulticlassSvm, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)?).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<MulticlassSvm> {
    let bytes = std::fs::read(path).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

pub(crate) fn encode(model: &MulticlassSvm) -> Result<Vec<u8>> {
    let first = model
        .models
        .first()
        .ok_or_else(|| SvmError::Format("model has no classes".into()))?;
    if model.models.len() > u8::MAX as usize {
        return Err(SvmError::Format("too many classes".into()));
    }
    if model.models.iter().any(|m| m.kernel != first.kernel || m.c != first.c) {
        return Err(SvmError::Format("binary models disagree on kernel or C".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, gamma) = match first.kernel {
        Kernel::Linear => (0u8, 0.0),
        Kernel::Rbf { gamma } => (1u8, gamma),
    };
    out.push(tag);
    out.extend_from_slice(&gamma.to_le_bytes());
    out.extend_from_slice(&first.c.to_le_bytes());
    out.push(model.models.len() as u8);
    let s = &model.standardizer;
    out.extend_from_slice(&(s.dim() as u32).to_le_bytes());
    for v in s.mean().iter().chain(s.std()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for m in &model.models {
        out.extend_from_slice(&(m.dual_coeffs.len() as u32).to_le_bytes());
        out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
        for c in &m.dual_coeffs {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&m.bias.to_le_bytes());
        for v in m.support_vectors.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<MulticlassSvm> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(SvmError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(SvmError::UnsupportedVersion(version));
    }
    let tag = r.take(1, "kernel tag")?[0];
    let gamma = r.f64("gamma")?;
    let kernel = match tag {
        0 => Kernel::Linear,
        1 => Kernel::Rbf { gamma },
        t => return Err(SvmError::Format(format!("unknown kernel tag {t}"))),
    };
    let c = r.f64("C")?;
    let classes = r.take(1, "class count")?[0] as usize;
    let dim = r.u32("standardizer dim")? as usize;
    let mean = r.f64s(dim, "standardizer mean")?;
    let std = r.f64s(dim, "standardizer std")?;
    let standardizer = Standardizer::from_parts(mean, std).map_err(|e| SvmError::Format(e.to_string()))?;
    let mut models = Vec::with_capacity(classes);
    for class in 0..classes {
        let sv_count = r.u32(&format!("class {class} sv count"))? as usize;
        let sv_dim = r.u32(&format!("class {class} dim"))? as usize;
        if sv_dim != dim {
            return Err(SvmError::Format(format!(
                "class {class} has dimension {sv_dim}, standardizer has {dim}"
            )));
        }
        let dual_coeffs = r.f64s(sv_count, &format!("class {class} coefficients"))?;
        let bias = r.f64(&format!("class {class} bias"))?;
        let n = sv_count
            .checked_mul(dim)
            .ok_or_else(|| SvmError::Format("support vector block overflows".into()))?;
        let raw = r.take(
            n.checked_mul(4).ok_or_else(|| SvmError::Format("support vector block overflows".into()))?,
            &format!("class {class} support vectors"),
        )?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        models.push(BinarySvm {
            kernel,
            c,
            support_vectors: FeatureMatrix::new(sv_count, dim, data)?,
            dual_coeffs,
            bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(SvmError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(MulticlassSvm { standardizer, models })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(SvmError::Truncated(what.to_string())),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| SvmError::Truncated(what.to_string()))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
