//! Dataset records, generation-plan arithmetic and the on-disk case layout.
//!
//! Manifest: UTF-8, one patient per line, six tab-separated fields
//! `id  t1_arterial  t1_portal  t2  tumor_mask  liver_mask`. Blank lines and
//! lines starting with `#` are skipped. Relative paths resolve against the
//! manifest's directory.
//!
//! Output layout, one directory per synthetic case:
//!
//! ```text
//! out/<case_id>/conditioning.png
//! out/<case_id>/tumor_mask.png
//! out/<case_id>/meta.txt
//! out/<case_id>/{t1_arterial,t1_portal,t2}.png   (written by the generators)
//! out/summary.txt
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::compose;
use crate::edge_detect::ThresholdPair;
use crate::imaging::{self, BinaryMask, GrayImage, ImagingError, ResizeMode};
use crate::mask_transform::TransformSpec;

pub const CONDITIONING_FILE: &str = "conditioning.png";
pub const TUMOR_MASK_FILE: &str = "tumor_mask.png";
pub const META_FILE: &str = "meta.txt";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("patient {id}: {reason}")]
    Validation { id: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan infeasible: {patients} patients x {s} transforms x {p} thresholds = {capacity} < target {target}")]
    Infeasible {
        patients: usize,
        s: u32,
        p: u32,
        capacity: u64,
        target: u32,
    },
    #[error("invalid plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetaError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("missing key {0}")]
    MissingKey(&'static str),
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value}")]
    BadValue { key: &'static str, value: String },
}

/// The three co-registered acquisitions per patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Acquisition {
    T1Arterial,
    T1Portal,
    T2,
}

impl Acquisition {
    pub const ALL: [Acquisition; 3] = [Acquisition::T1Arterial, Acquisition::T1Portal, Acquisition::T2];

    pub fn name(self) -> &'static str {
        match self {
            Acquisition::T1Arterial => "t1_arterial",
            Acquisition::T1Portal => "t1_portal",
            Acquisition::T2 => "t2",
        }
    }

    /// PNG name of this acquisition inside a case directory.
    pub fn file_name(self) -> String {
        format!("{}.png", self.name())
    }
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Acquisition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Acquisition::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown acquisition {s:?} (expected t1_arterial, t1_portal or t2)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub id: String,
    pub t1_arterial: PathBuf,
    pub t1_portal: PathBuf,
    pub t2: PathBuf,
    pub tumor_mask: PathBuf,
    pub liver_mask: PathBuf,
}

impl PatientRecord {
    pub fn acquisition(&self, which: Acquisition) -> &Path {
        match which {
            Acquisition::T1Arterial => &self.t1_arterial,
            Acquisition::T1Portal => &self.t1_portal,
            Acquisition::T2 => &self.t2,
        }
    }

    /// Manifest line for this record (paths written as stored).
    pub fn to_line(&self) -> String {
        [
            self.id.as_str(),
            &self.t1_arterial.to_string_lossy(),
            &self.t1_portal.to_string_lossy(),
            &self.t2.to_string_lossy(),
            &self.tumor_mask.to_string_lossy(),
            &self.liver_mask.to_string_lossy(),
        ]
        .join("\t")
    }
}

/// Decoded rasters of one patient at working resolution.
#[derive(Debug, Clone)]
pub struct PatientData {
    pub record: PatientRecord,
    pub t1_arterial: GrayImage,
    pub t1_portal: GrayImage,
    pub t2: GrayImage,
    pub tumor: BinaryMask,
    pub liver: BinaryMask,
}

impl PatientData {
    pub fn acquisition(&self, which: Acquisition) -> &GrayImage {
        match which {
            Acquisition::T1Arterial => &self.t1_arterial,
            Acquisition::T1Portal => &self.t1_portal,
            Acquisition::T2 => &self.t2,
        }
    }
}

/// Checks applied to every manifest record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    pub working_size: u32,
    pub min_tumor_area: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            working_size: 256,
            min_tumor_area: 30,
        }
    }
}

/// Parses manifest text without touching the referenced files.
pub fn parse_manifest(
    text: &str,
    base_dir: &Path,
    origin: &Path,
) -> Result<Vec<PatientRecord>, ManifestError> {
    let parse_err = |reason: String| ManifestError::Parse {
        path: origin.to_path_buf(),
        reason,
    };
    let resolve = |field: &str| -> Result<PathBuf, ManifestError> {
        let p = Path::new(field);
        let joined = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        std::path::absolute(&joined).map_err(|source| ManifestError::Io { path: joined, source })
    };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(parse_err(format!(
                "line {}: expected 6 tab-separated fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        if let Some(i) = fields.iter().position(|f| f.is_empty()) {
            return Err(parse_err(format!("line {}: field {} is empty", lineno + 1, i + 1)));
        }
        let id = fields[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(ManifestError::Validation {
                id,
                reason: "duplicate patient id".into(),
            });
        }
        records.push(PatientRecord {
            id,
            t1_arterial: resolve(fields[1])?,
            t1_portal: resolve(fields[2])?,
            t2: resolve(fields[3])?,
            tumor_mask: resolve(fields[4])?,
            liver_mask: resolve(fields[5])?,
        });
    }
    if records.is_empty() {
        return Err(parse_err("no records".into()));
    }
    Ok(records)
}

/// Decodes and validates one record, returning its rasters at working size.
///
/// All five files must decode and share native dimensions; both masks must be
/// non-empty and overlap by at least `min_tumor_area` pixels after resizing.
pub fn load_patient(
    record: &PatientRecord,
    options: ValidationOptions,
) -> Result<PatientData, ManifestError> {
    let invalid = |reason: String| ManifestError::Validation {
        id: record.id.clone(),
        reason,
    };
    let describe = |e: ImagingError| match e {
        ImagingError::FileNotFound(p) => format!("missing file {}", p.display()),
        other => other.to_string(),
    };
    let load = |p: &Path| imaging::load_png(p).map_err(|e| invalid(describe(e)));

    let t1a = load(&record.t1_arterial)?;
    let t1p = load(&record.t1_portal)?;
    let t2 = load(&record.t2)?;
    let tumor = load(&record.tumor_mask)?.to_mask();
    let liver = load(&record.liver_mask)?.to_mask();

    let dims = t1a.dims();
    let named = [
        ("t1_portal", t1p.dims()),
        ("t2", t2.dims()),
        ("tumor_mask", tumor.dims()),
        ("liver_mask", liver.dims()),
    ];
    if let Some((name, d)) = named.iter().find(|(_, d)| *d != dims) {
        return Err(invalid(format!(
            "dimension clash: t1_arterial is {}x{} but {name} is {}x{}",
            dims.0, dims.1, d.0, d.1
        )));
    }
    if tumor.is_empty() {
        return Err(invalid("empty tumor mask".into()));
    }
    if liver.is_empty() {
        return Err(invalid("empty liver mask".into()));
    }

    let size = options.working_size;
    let tumor = imaging::resize_mask(&tumor, size, size);
    let liver = imaging::resize_mask(&liver, size, size);
    let overlap = compose::intersect(&tumor, &liver).expect("same size").area();
    if overlap < options.min_tumor_area {
        return Err(invalid(format!(
            "tumor/liver overlap of {overlap} px is below min_tumor_area {}",
            options.min_tumor_area
        )));
    }
    let resize = |img: &GrayImage| imaging::resize(img, size, size, ResizeMode::Bilinear);
    Ok(PatientData {
        record: record.clone(),
        t1_arterial: resize(&t1a),
        t1_portal: resize(&t1p),
        t2: resize(&t2),
        tumor,
        liver,
    })
}

/// Reads, parses and fully validates a manifest file.
pub fn load_manifest(
    path: impl AsRef<Path>,
    options: ValidationOptions,
) -> Result<Vec<PatientRecord>, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let records = parse_manifest(&text, base, path)?;
    for r in &records {
        load_patient(r, options)?;
    }
    Ok(records)
}

/// How many synthetic cases to derive and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationPlan {
    pub master_seed: u64,
    /// Transforms per patient (S).
    pub s_per_patient: u32,
    /// Threshold pairs per patient (P).
    pub p_per_patient: u32,
    pub target_cases: u32,
    pub working_size: u32,
}

impl Default for GenerationPlan {
    fn default() -> Self {
        Self {
            master_seed: 0,
            s_per_patient: 4,
            p_per_patient: 3,
            target_cases: 1000,
            working_size: 256,
        }
    }
}

impl GenerationPlan {
    pub fn validate(&self, patients: usize) -> Result<(), PlanError> {
        if self.s_per_patient == 0 || self.p_per_patient == 0 || self.target_cases == 0 {
            return Err(PlanError::Invalid(
                "s_per_patient, p_per_patient and target_cases must be >= 1".into(),
            ));
        }
        if self.working_size < crate::edge_detect::MIN_SIDE {
            return Err(PlanError::Invalid(format!(
                "working_size must be >= {}",
                crate::edge_detect::MIN_SIDE
            )));
        }
        if patients == 0 {
            return Err(PlanError::Invalid("no patients".into()));
        }
        let capacity = patients as u64 * self.s_per_patient as u64 * self.p_per_patient as u64;
        if capacity < self.target_cases as u64 {
            return Err(PlanError::Infeasible {
                patients,
                s: self.s_per_patient,
                p: self.p_per_patient,
                capacity,
                target: self.target_cases,
            });
        }
        Ok(())
    }
}

/// One `(m, s, p)` slot of the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub patient: usize,
    pub s: u32,
    pub p: u32,
}

impl Assignment {
    /// `case_{m:04}_{s:03}_{p:03}`
    pub fn case_id(&self) -> String {
        format!("case_{:04}_{:03}_{:03}", self.patient, self.s, self.p)
    }
}

/// Expands the plan into assignments in lexicographic `(m, s, p)` order.
///
/// Patient `m` receives `⌊T/M⌋ + [m < T mod M]` cases, taken from the front
/// of its own `(s, p)` sequence.
pub fn expand_plan(patients: usize, plan: &GenerationPlan) -> Result<Vec<Assignment>, PlanError> {
    plan.validate(patients)?;
    let target = plan.target_cases as usize;
    let base = target / patients;
    let extra = target % patients;
    let mut out = Vec::with_capacity(target);
    for m in 0..patients {
        let quota = base + usize::from(m < extra);
        let slots = (0..plan.s_per_patient)
            .flat_map(|s| (0..plan.p_per_patient).map(move |p| (s, p)))
            .take(quota);
        out.extend(slots.map(|(s, p)| Assignment { patient: m, s, p }));
    }
    debug_assert_eq!(out.len(), target);
    Ok(out)
}

/// Contents of a case's `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseMeta {
    pub source_patient: String,
    pub seed: u64,
    pub transform: TransformSpec,
    pub thresholds: ThresholdPair,
}

const META_KEYS: [&str; 10] = [
    "source_patient",
    "seed",
    "zoom",
    "rotation",
    "flip_h",
    "flip_v",
    "dx",
    "dy",
    "low",
    "high",
];

impl CaseMeta {
    /// `key=value` lines in fixed key order; floats use the shortest
    /// round-tripping decimal form.
    pub fn to_text(&self) -> String {
        let t = &self.transform;
        let values = [
            self.source_patient.clone(),
            self.seed.to_string(),
            t.zoom.to_string(),
            t.rotation.to_string(),
            t.flip_h.to_string(),
            t.flip_v.to_string(),
            t.dx.to_string(),
            t.dy.to_string(),
            self.thresholds.low().to_string(),
            self.thresholds.high().to_string(),
        ];
        META_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, MetaError> {
        let mut found: [Option<&str>; 10] = [None; 10];
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(MetaError::Syntax { line: i + 1 })?;
            let slot = META_KEYS
                .iter()
                .position(|&key| key == k.trim())
                .ok_or_else(|| MetaError::UnknownKey(k.trim().to_string()))?;
            found[slot] = Some(v.trim());
        }
        let get = |i: usize| found[i].ok_or(MetaError::MissingKey(META_KEYS[i]));
        fn num<T: FromStr>(key: &'static str, v: &str) -> Result<T, MetaError> {
            v.parse().map_err(|_| MetaError::BadValue {
                key,
                value: v.to_string(),
            })
        }
        let transform = TransformSpec {
            zoom: num("zoom", get(2)?)?,
            rotation: num("rotation", get(3)?)?,
            flip_h: num("flip_h", get(4)?)?,
            flip_v: num("flip_v", get(5)?)?,
            dx: num("dx", get(6)?)?,
            dy: num("dy", get(7)?)?,
        };
        if transform.validate().is_err() {
            let zoom_ok = transform.zoom.is_finite() && transform.zoom > 0.0;
            let (key, value) = if zoom_ok {
                ("rotation", transform.rotation)
            } else {
                ("zoom", transform.zoom)
            };
            return Err(MetaError::BadValue {
                key,
                value: value.to_string(),
            });
        }
        let (low, high): (u8, u8) = (num("low", get(8)?)?, num("high", get(9)?)?);
        let thresholds = ThresholdPair::new(low, high).map_err(|_| MetaError::BadValue {
            key: "low",
            value: format!("{low}/{high}"),
        })?;
        Ok(CaseMeta {
            source_patient: get(0)?.to_string(),
            seed: num("seed", get(1)?)?,
            transform,
            thresholds,
        })
    }
}

/// A case directory as found on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCaseRecord {
    pub case_id: String,
    pub meta: CaseMeta,
    pub conditioning: PathBuf,
    pub tumor_mask_out: PathBuf,
    /// Generator outputs, present once all three acquisitions were written.
    pub outputs: Option<[PathBuf; 3]>,
}

impl SyntheticCaseRecord {
    pub fn read(case_dir: &Path) -> Result<Self, ManifestError> {
        let case_id = case_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let meta_path = case_dir.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|source| ManifestError::Io {
            path: meta_path.clone(),
            source,
        })?;
        let meta = CaseMeta::parse(&text).map_err(|e| ManifestError::Parse {
            path: meta_path,
            reason: e.to_string(),
        })?;
        let outputs = Acquisition::ALL.map(|a| case_dir.join(a.file_name()));
        let outputs = outputs.iter().all(|p| p.is_file()).then_some(outputs);
        Ok(Self {
            case_id,
            meta,
            conditioning: case_dir.join(CONDITIONING_FILE),
            tumor_mask_out: case_dir.join(TUMOR_MASK_FILE),
            outputs,
        })
    }
}
