use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::stage1::{load_patients, Summary};
use super::{PipelineConfig, PipelineError};
use crate::compose::{intersect, ConditioningImage};
use crate::exec;
use crate::imaging;
use crate::manifest::{CaseMeta, PatientData, CONDITIONING_FILE, META_FILE, SUMMARY_FILE, TUMOR_MASK_FILE};
use crate::mask_transform::{apply_transform, centroid};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// A required file is missing.
    Incomplete,
    /// `meta.txt` could not be parsed or names an unknown patient.
    Meta,
    /// Conditioning pixel outside `{0, 128, 255}`.
    Alphabet,
    /// `tumor_mask.png` differs from the conditioning image's tumour level.
    MaskMismatch,
    /// Transformed tumour centroid lies outside the placement region.
    Centroid,
    /// Re-applying the recorded transform does not reproduce the tumour mask.
    Consistency,
    /// `summary.txt` disagrees with the tree.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub case_id: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.case_id, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub cases_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Case directories (`case_*`) under `dir`, sorted.
pub fn case_dirs(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let io = |source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_case = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("case_"));
        if is_case && path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Re-checks every case under `config.output_dir` against its sources.
pub fn verify(config: &PipelineConfig) -> Result<VerifyReport, PipelineError> {
    config.validate()?;
    exec::with_threads(config.threads, || verify_inner(config))
}

fn verify_inner(config: &PipelineConfig) -> Result<VerifyReport, PipelineError> {
    let patients = load_patients(config)?;
    let by_id: HashMap<&str, &PatientData> =
        patients.iter().map(|p| (p.record.id.as_str(), p)).collect();
    let dirs = case_dirs(&config.output_dir)?;
    let mut violations: Vec<Violation> = exec::map_ordered(&dirs, |d| check_case(config, &by_id, d))
        .into_iter()
        .flatten()
        .collect();

    let summary_path = config.output_dir.join(SUMMARY_FILE);
    let summary = fs::read_to_string(&summary_path).ok().and_then(|t| Summary::parse(&t));
    let mut tree_issue = |detail: String| {
        violations.push(Violation {
            case_id: SUMMARY_FILE.into(),
            kind: ViolationKind::Summary,
            detail,
        })
    };
    match summary {
        None => tree_issue("missing or unparseable".into()),
        Some(s) if s.written != dirs.len() => tree_issue(format!(
            "summary lists {} written cases, tree has {}",
            s.written,
            dirs.len()
        )),
        Some(_) => {}
    }
    Ok(VerifyReport {
        cases_checked: dirs.len(),
        violations,
    })
}

fn check_case(
    config: &PipelineConfig,
    patients: &HashMap<&str, &PatientData>,
    dir: &Path,
) -> Vec<Violation> {
    let case_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let violation = |kind, detail: String| {
        vec![Violation {
            case_id: case_id.clone(),
            kind,
            detail,
        }]
    };

    let missing: Vec<&str> = [CONDITIONING_FILE, TUMOR_MASK_FILE, META_FILE]
        .into_iter()
        .filter(|f| !dir.join(f).is_file())
        .collect();
    if !missing.is_empty() {
        return violation(ViolationKind::Incomplete, format!("missing {}", missing.join(", ")));
    }

    let meta = match fs::read_to_string(dir.join(META_FILE))
        .map_err(|e| e.to_string())
        .and_then(|t| CaseMeta::parse(&t).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => return violation(ViolationKind::Meta, e),
    };
    let Some(patient) = patients.get(meta.source_patient.as_str()) else {
        return violation(
            ViolationKind::Meta,
            format!("unknown source_patient {}", meta.source_patient),
        );
    };

    let cond_img = match imaging::load_png(dir.join(CONDITIONING_FILE)) {
        Ok(i) => i,
        Err(e) => return violation(ViolationKind::Incomplete, e.to_string()),
    };
    let cond = match ConditioningImage::from_image(cond_img) {
        Ok(c) => c,
        Err(e) => return violation(ViolationKind::Alphabet, e.to_string()),
    };
    let tumor_png = match imaging::load_png(dir.join(TUMOR_MASK_FILE)) {
        Ok(i) => i,
        Err(e) => return violation(ViolationKind::Incomplete, e.to_string()),
    };
    if tumor_png.data().iter().any(|&v| v != 0 && v != 255) {
        return violation(ViolationKind::MaskMismatch, "tumor_mask.png is not binary".into());
    }
    let tumor = tumor_png.to_mask();
    if tumor != cond.tumor_mask() {
        return violation(
            ViolationKind::MaskMismatch,
            "tumor_mask differs from the conditioning tumor level".into(),
        );
    }

    let transformed = match apply_transform(&patient.tumor, &meta.transform) {
        Ok(m) => m,
        Err(e) => return violation(ViolationKind::Consistency, e.to_string()),
    };
    let (cx, cy) = centroid(&transformed).expect("apply_transform returns non-empty masks");
    if !config.region.contains(cx, cy, transformed.width(), transformed.height()) {
        return violation(
            ViolationKind::Centroid,
            format!("centroid ({cx:.2}, {cy:.2}) outside region"),
        );
    }
    match intersect(&transformed, &patient.liver) {
        Ok(expected) if expected == tumor => Vec::new(),
        Ok(_) => violation(
            ViolationKind::Consistency,
            "recorded transform does not reproduce tumor_mask".into(),
        ),
        Err(e) => violation(ViolationKind::Consistency, e.to_string()),
    }
}
