//! Binary model file.
//!
//! Layout, all little-endian: the 8-byte magic `RFDEMMDL`, a `u32` format
//! version, the architecture (`u32` centroid count, `f64` radius, `u32`
//! neighbour cap, then each of the three width lists as a `u32` length
//! followed by `u32` widths), the normalisation statistics (three `f64`
//! means, three `f64` scales), a `u64` parameter count and the parameters as
//! `f64`.

use std::fs;
use std::path::Path;

use super::model::{ClassifierModel, ModelConfig, NormStats};
use super::DemError;

pub const MAGIC: &[u8; 8] = b"RFDEMMDL";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(model: &ClassifierModel) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(64 + 8 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.sa_centroids as u32).to_le_bytes());
    out.extend_from_slice(&cfg.sa_radius.to_le_bytes());
    out.extend_from_slice(&(cfg.sa_max_neighbors as u32).to_le_bytes());
    for widths in [&cfg.sa_mlp_widths, &cfg.global_mlp_widths, &cfg.head_widths] {
        out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
        for &w in widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
    }
    let norm = model.norm_stats();
    for v in norm.mean.iter().chain(&norm.scale) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DemError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(DemError::Format(format!("truncated at byte {}", self.pos)));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DemError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DemError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DemError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn widths(&mut self) -> Result<Vec<usize>, DemError> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(DemError::Format(format!("implausible layer count {n}")));
        }
        (0..n).map(|_| self.u32().map(|w| w as usize)).collect()
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<ClassifierModel, DemError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(DemError::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DemError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let sa_centroids = r.u32()? as usize;
    let sa_radius = r.f64()?;
    let sa_max_neighbors = r.u32()? as usize;
    let config = ModelConfig {
        sa_centroids,
        sa_radius,
        sa_max_neighbors,
        sa_mlp_widths: r.widths()?,
        global_mlp_widths: r.widths()?,
        head_widths: r.widths()?,
    };
    config.validate()?;
    let mut norm = NormStats::default();
    for v in norm.mean.iter_mut() {
        *v = r.f64()?;
    }
    for v in norm.scale.iter_mut() {
        *v = r.f64()?;
    }
    let count = r.u64()?;
    if count != config.parameter_count() as u64 {
        return Err(DemError::DimensionMismatch(format!(
            "file stores {count} parameters, architecture needs {}",
            config.parameter_count()
        )));
    }
    let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    if r.pos != buf.len() {
        return Err(DemError::Format(format!(
            "{} trailing bytes after parameters",
            buf.len() - r.pos
        )));
    }
    ClassifierModel::from_parts(config, norm, params)
}

pub fn load(path: &Path) -> Result<ClassifierModel, DemError> {
    from_bytes(&fs::read(path)?)
}
