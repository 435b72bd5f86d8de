//! Flat `key=value` pipeline configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! manifest=data/manifest.tsv
//! output_dir=out
//! threads=0
//! min_tumor_area=30
//! edge_source=t1_arterial
//! plan.seed=42
//! plan.s_per_patient=4
//! plan.p_per_patient=3
//! plan.target_cases=1000
//! plan.working_size=256
//! ranges.zoom_min=0.8
//! ranges.zoom_max=1.2
//! ranges.rotation_max=15
//! ranges.flip_h=true
//! ranges.flip_v=false
//! ranges.translate_max=60
//! region.x_min=0.08
//! region.x_max=0.55
//! region.y_min=0.15
//! region.y_max=0.65
//! canny.sigma=1.4
//! canny.magnitude_scale=0.25
//! sampler.max_attempts=1000
//! ```
//!
//! Only `manifest` is required. Relative paths resolve against the config
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::edge_detect::CannyParams;
use crate::manifest::{Acquisition, GenerationPlan, ValidationOptions};
use crate::mask_transform::{AnatomicalRegion, SamplerOptions, TransformRanges};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub manifest_path: PathBuf,
    pub output_dir: PathBuf,
    pub plan: GenerationPlan,
    pub ranges: TransformRanges,
    pub region: AnatomicalRegion,
    pub canny: CannyParams,
    /// Acquisition whose edges build the conditioning image.
    pub edge_source: Acquisition,
    pub min_tumor_area: usize,
    pub max_attempts: u32,
    /// Worker count, 0 = one per core.
    pub threads: usize,
}

impl PipelineConfig {
    pub fn new(manifest_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest_path: manifest_path.into(),
            output_dir: output_dir.into(),
            plan: GenerationPlan::default(),
            ranges: TransformRanges::default(),
            region: AnatomicalRegion::default(),
            canny: CannyParams::default(),
            edge_source: Acquisition::T1Arterial,
            min_tumor_area: 30,
            max_attempts: SamplerOptions::default().max_attempts,
            threads: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::new(PathBuf::new(), base_dir.join("out"));
        let mut have_manifest = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            let path = || {
                let p = Path::new(value);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base_dir.join(p)
                }
            };
            match key {
                "manifest" => {
                    cfg.manifest_path = path();
                    have_manifest = true;
                }
                "output_dir" => cfg.output_dir = path(),
                "threads" => cfg.threads = parse(key, value)?,
                "min_tumor_area" => cfg.min_tumor_area = parse(key, value)?,
                "edge_source" => cfg.edge_source = parse(key, value)?,
                "plan.seed" => cfg.plan.master_seed = parse(key, value)?,
                "plan.s_per_patient" => cfg.plan.s_per_patient = parse(key, value)?,
                "plan.p_per_patient" => cfg.plan.p_per_patient = parse(key, value)?,
                "plan.target_cases" => cfg.plan.target_cases = parse(key, value)?,
                "plan.working_size" => cfg.plan.working_size = parse(key, value)?,
                "ranges.zoom_min" => cfg.ranges.zoom_min = parse(key, value)?,
                "ranges.zoom_max" => cfg.ranges.zoom_max = parse(key, value)?,
                "ranges.rotation_max" => cfg.ranges.rotation_max = parse(key, value)?,
                "ranges.flip_h" => cfg.ranges.allow_flip_h = parse(key, value)?,
                "ranges.flip_v" => cfg.ranges.allow_flip_v = parse(key, value)?,
                "ranges.translate_max" => cfg.ranges.translate_max = parse(key, value)?,
                "region.x_min" => cfg.region.x_min = parse(key, value)?,
                "region.x_max" => cfg.region.x_max = parse(key, value)?,
                "region.y_min" => cfg.region.y_min = parse(key, value)?,
                "region.y_max" => cfg.region.y_max = parse(key, value)?,
                "canny.sigma" => cfg.canny.sigma = parse(key, value)?,
                "canny.magnitude_scale" => cfg.canny.magnitude_scale = parse(key, value)?,
                "sampler.max_attempts" => cfg.max_attempts = parse(key, value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if !have_manifest {
            return Err(ConfigError::Missing("manifest"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every sub-config's own invariants.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.ranges.validate().map_err(|e| invalid(&e))?;
        self.region.validate().map_err(|e| invalid(&e))?;
        self.canny.validate().map_err(|e| invalid(&e))?;
        let p = &self.plan;
        if p.s_per_patient == 0 || p.p_per_patient == 0 || p.target_cases == 0 {
            return Err(ConfigError::Invalid(
                "plan.s_per_patient, plan.p_per_patient and plan.target_cases must be >= 1".into(),
            ));
        }
        if p.working_size < crate::edge_detect::MIN_SIDE {
            return Err(ConfigError::Invalid(format!(
                "plan.working_size must be >= {}",
                crate::edge_detect::MIN_SIDE
            )));
        }
        if self.max_attempts == 0 {
            return Err(ConfigError::Invalid("sampler.max_attempts must be >= 1".into()));
        }
        Ok(())
    }

    /// Serializes every key, paths as given.
    pub fn to_text(&self) -> String {
        let r = &self.ranges;
        let g = &self.region;
        let p = &self.plan;
        let entries: Vec<(&str, String)> = vec![
            ("manifest", self.manifest_path.display().to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("threads", self.threads.to_string()),
            ("min_tumor_area", self.min_tumor_area.to_string()),
            ("edge_source", self.edge_source.to_string()),
            ("plan.seed", p.master_seed.to_string()),
            ("plan.s_per_patient", p.s_per_patient.to_string()),
            ("plan.p_per_patient", p.p_per_patient.to_string()),
            ("plan.target_cases", p.target_cases.to_string()),
            ("plan.working_size", p.working_size.to_string()),
            ("ranges.zoom_min", r.zoom_min.to_string()),
            ("ranges.zoom_max", r.zoom_max.to_string()),
            ("ranges.rotation_max", r.rotation_max.to_string()),
            ("ranges.flip_h", r.allow_flip_h.to_string()),
            ("ranges.flip_v", r.allow_flip_v.to_string()),
            ("ranges.translate_max", r.translate_max.to_string()),
            ("region.x_min", g.x_min.to_string()),
            ("region.x_max", g.x_max.to_string()),
            ("region.y_min", g.y_min.to_string()),
            ("region.y_max", g.y_max.to_string()),
            ("canny.sigma", self.canny.sigma.to_string()),
            ("canny.magnitude_scale", self.canny.magnitude_scale.to_string()),
            ("sampler.max_attempts", self.max_attempts.to_string()),
        ];
        entries.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validation_options(&self) -> ValidationOptions {
        ValidationOptions {
            working_size: self.plan.working_size,
            min_tumor_area: self.min_tumor_area,
        }
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        SamplerOptions {
            max_attempts: self.max_attempts,
            min_overlap: self.min_tumor_area.max(1),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}
