//! Case directories: `mask.pgm`, `conf.f32r`, `logits.f32r`, `meta.json`,
//! plus `pred.pgm` (argmax of the corrupted logits) for corrupted cases.
//! A suite directory adds a `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use aop_core::geometry::{Ellipse, Point};
use aop_core::phantom::{self, Corruption, PhantomCase, PhantomSpec, PsSegment};
use aop_core::raster::argmax_labels;
use aop_core::rng;
use aop_core::{ConfMap, LabelMask, LogitMap};
use serde::{Deserialize, Serialize};

use crate::error::ToolError;
use crate::{f32r, pgm, report};

pub const MASK_FILE: &str = "mask.pgm";
pub const PRED_FILE: &str = "pred.pgm";
pub const CONF_FILE: &str = "conf.f32r";
pub const LOGITS_FILE: &str = "logits.f32r";
pub const META_FILE: &str = "meta.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMeta {
    pub case_id: String,
    pub seed: u64,
    pub rng: String,
    pub spec: PhantomSpec,
    pub gt_aop_deg: f64,
    pub gt_tangent: Point,
    pub gt_ellipse: Ellipse,
    pub gt_ps: PsSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub case_id: String,
    pub seed: u64,
    pub gt_aop_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rng: String,
    pub base_seed: u64,
    pub n: usize,
    pub corruption: Corruption,
    pub cases: Vec<ManifestEntry>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, ToolError> {
    fs::read(path).map_err(|e| ToolError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ToolError> {
    fs::write(path, bytes).map_err(|e| ToolError::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<LabelMask, ToolError> {
    pgm::read_mask_pgm(&read_bytes(path)?).map_err(|source| ToolError::Format { path: path.into(), source })
}

pub fn read_conf(path: &Path) -> Result<ConfMap, ToolError> {
    f32r::read_conf(&read_bytes(path)?).map_err(|source| ToolError::Format { path: path.into(), source })
}

pub fn read_logits(path: &Path) -> Result<LogitMap, ToolError> {
    f32r::read_logits(&read_bytes(path)?).map_err(|source| ToolError::Format { path: path.into(), source })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ToolError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| ToolError::Json { path: path.into(), source })
}

/// Zero-padded id wide enough for `n` cases (at least three digits).
pub fn case_id(index: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len().max(3);
    format!("case_{index:0width$}")
}

pub fn meta_of(case_id: &str, case: &PhantomCase) -> CaseMeta {
    CaseMeta {
        case_id: case_id.into(),
        seed: case.spec.seed,
        rng: rng::ALGORITHM.into(),
        spec: case.spec,
        gt_aop_deg: case.gt_aop_deg,
        gt_tangent: case.gt_tangent,
        gt_ellipse: case.gt_ellipse(),
        gt_ps: case.gt_ps(),
    }
}

pub fn write_case(dir: &Path, case_id: &str, case: &PhantomCase) -> Result<(), ToolError> {
    fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    write_bytes(&dir.join(MASK_FILE), &pgm::write_mask_pgm(&case.mask))?;
    write_bytes(&dir.join(CONF_FILE), &f32r::write_conf(&case.conf))?;
    write_bytes(&dir.join(LOGITS_FILE), &f32r::write_logits(&case.logits))?;
    write_bytes(&dir.join(META_FILE), report::to_json_pretty(&meta_of(case_id, case)).as_bytes())?;
    let pred = dir.join(PRED_FILE);
    if case.spec.corruption != Corruption::None {
        write_bytes(&pred, &pgm::write_mask_pgm(&argmax_labels(&case.logits)))?;
    } else if pred.exists() {
        fs::remove_file(&pred).map_err(|e| ToolError::io(&pred, e))?;
    }
    Ok(())
}

/// Writes `n` seeded cases under `out`, each corrupted with its own seed.
pub fn write_suite(out: &Path, n: usize, base_seed: u64, corruption: Corruption) -> Result<Manifest, ToolError> {
    fs::create_dir_all(out).map_err(|e| ToolError::io(out, e))?;
    let mut cases = Vec::with_capacity(n);
    for (i, clean) in phantom::suite(n, base_seed)?.into_iter().enumerate() {
        let case = phantom::corrupt(&clean, corruption, clean.spec.seed);
        let id = case_id(i, n);
        write_case(&out.join(&id), &id, &case)?;
        cases.push(ManifestEntry { case_id: id, seed: case.spec.seed, gt_aop_deg: case.gt_aop_deg });
    }
    let manifest = Manifest { rng: rng::ALGORITHM.into(), base_seed, n, corruption, cases };
    write_bytes(&out.join(MANIFEST_FILE), report::to_json_pretty(&manifest).as_bytes())?;
    Ok(manifest)
}

/// Subdirectories of `dir` holding `file`, sorted by name.
pub fn case_dirs(dir: &Path, files: &[&str]) -> Result<Vec<(String, PathBuf)>, ToolError> {
    let entries = fs::read_dir(dir).map_err(|e| ToolError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| ToolError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() && files.iter().any(|f| path.join(f).is_file()) {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}
