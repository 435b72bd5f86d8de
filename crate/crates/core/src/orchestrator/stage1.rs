use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::seed::{split_seed, threshold_seed};
use super::{PipelineConfig, PipelineError};
use crate::compose::{intersect, overlay};
use crate::edge_detect::{canny_with, sample_thresholds, EdgeMap, ThresholdPair};
use crate::exec;
use crate::imaging;
use crate::manifest::{
    self, expand_plan, load_patient, Assignment, CaseMeta, PatientData, CONDITIONING_FILE,
    META_FILE, SUMMARY_FILE, TUMOR_MASK_FILE,
};
use crate::mask_transform::{sample_constrained, TransformError};

/// Outcome of a Stage-1 run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub written: usize,
    /// `(case_id, reason)` in plan order.
    pub failed: Vec<(String, String)>,
    /// Rejected transform draws across all written cases.
    pub resamples: u64,
}

impl Summary {
    /// `summary.txt` contents.
    pub fn to_text(&self) -> String {
        let mut s = format!("written={}\nfailed={}\n", self.written, self.failed.len());
        for (id, reason) in &self.failed {
            s.push_str(&format!("failed_case={id}:{reason}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut written = None;
        let mut failed_count = None;
        let mut failed = Vec::new();
        for line in text.lines() {
            let (k, v) = line.split_once('=')?;
            match k {
                "written" => written = v.parse().ok(),
                "failed" => failed_count = v.parse::<usize>().ok(),
                "failed_case" => {
                    let (id, reason) = v.split_once(':')?;
                    failed.push((id.to_string(), reason.to_string()));
                }
                _ => return None,
            }
        }
        (failed_count? == failed.len()).then_some(Summary {
            written: written?,
            failed,
            resamples: 0,
        })
    }
}

/// Everything derived once per patient before cases fan out.
struct PatientContext {
    data: PatientData,
    thresholds: Vec<ThresholdPair>,
    edges: Vec<EdgeMap>,
}

/// Loads and validates every patient of the manifest at working resolution.
pub fn load_patients(config: &PipelineConfig) -> Result<Vec<PatientData>, PipelineError> {
    let text = fs::read_to_string(&config.manifest_path).map_err(|source| {
        PipelineError::Manifest(manifest::ManifestError::Io {
            path: config.manifest_path.clone(),
            source,
        })
    })?;
    let base = config.manifest_path.parent().unwrap_or(Path::new("."));
    let records = manifest::parse_manifest(&text, base, &config.manifest_path)?;
    let options = config.validation_options();
    exec::map_ordered(&records, |r| load_patient(r, options))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(PipelineError::from)
}

fn failure_reason(e: &TransformError) -> String {
    match e {
        TransformError::ConstraintUnsatisfiable { attempts } => {
            format!("ConstraintUnsatisfiable after {attempts} attempts")
        }
        TransformError::EmptyMask => "EmptyMask".into(),
        other => other.to_string(),
    }
}

fn run_case(
    config: &PipelineConfig,
    patients: &[PatientContext],
    index: usize,
    a: &Assignment,
) -> Result<u32, String> {
    let ctx = &patients[a.patient];
    let seed = split_seed(config.plan.master_seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let placement = sample_constrained(
        &mut rng,
        &ctx.data.tumor,
        &config.ranges,
        &config.region,
        &ctx.data.liver,
        config.sampler_options(),
    )
    .map_err(|e| failure_reason(&e))?;
    let tumor = intersect(&placement.mask, &ctx.data.liver).map_err(|e| e.to_string())?;
    let cond = overlay(&tumor, &ctx.edges[a.p as usize]).map_err(|e| e.to_string())?;

    let meta = CaseMeta {
        source_patient: ctx.data.record.id.clone(),
        seed,
        transform: placement.spec,
        thresholds: ctx.thresholds[a.p as usize],
    };
    let dir = config.output_dir.join(a.case_id());
    fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    imaging::save_png(cond.image(), dir.join(CONDITIONING_FILE)).map_err(|e| e.to_string())?;
    imaging::save_mask(&tumor, dir.join(TUMOR_MASK_FILE)).map_err(|e| e.to_string())?;
    fs::write(dir.join(META_FILE), meta.to_text()).map_err(|e| e.to_string())?;
    Ok(placement.attempts)
}

/// Generates every case of the plan into `config.output_dir`.
///
/// Per-case failures are collected in the summary; only configuration,
/// manifest and plan problems abort the run.
pub fn run_stage1(config: &PipelineConfig) -> Result<Summary, PipelineError> {
    config.validate()?;
    exec::with_threads(config.threads, || run_inner(config))
}

fn run_inner(config: &PipelineConfig) -> Result<Summary, PipelineError> {
    let patients = load_patients(config)?;
    let assignments = expand_plan(patients.len(), &config.plan)?;

    let p_count = config.plan.p_per_patient as usize;
    let indices: Vec<usize> = (0..patients.len()).collect();
    let contexts = exec::map_ordered(&indices, |&m| {
        let data = &patients[m];
        let mut rng = ChaCha8Rng::seed_from_u64(threshold_seed(config.plan.master_seed, m as u64));
        let thresholds = sample_thresholds(&mut rng, p_count);
        let source = data.acquisition(config.edge_source);
        let edges = thresholds
            .iter()
            .map(|&pair| canny_with(source, pair, &config.canny))
            .collect::<Result<Vec<_>, _>>()?;
        Ok::<_, PipelineError>(PatientContext {
            data: data.clone(),
            thresholds,
            edges,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&config.output_dir).map_err(|source| PipelineError::Io {
        path: config.output_dir.clone(),
        source,
    })?;

    let indexed: Vec<(usize, Assignment)> = assignments.iter().copied().enumerate().collect();
    let outcomes = exec::map_ordered(&indexed, |(i, a)| run_case(config, &contexts, *i, a));

    let mut summary = Summary {
        written: 0,
        failed: Vec::new(),
        resamples: 0,
    };
    for ((_, a), outcome) in indexed.iter().zip(outcomes) {
        match outcome {
            Ok(attempts) => {
                summary.written += 1;
                summary.resamples += u64::from(attempts - 1);
            }
            Err(reason) => summary.failed.push((a.case_id(), reason)),
        }
    }
    let path = config.output_dir.join(SUMMARY_FILE);
    fs::write(&path, summary.to_text()).map_err(|source| PipelineError::Io { path, source })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_text_round_trip() {
        let s = Summary {
            written: 3,
            failed: vec![("case_0000_000_001".into(), "ConstraintUnsatisfiable after 5 attempts".into())],
            resamples: 0,
        };
        let text = s.to_text();
        assert_eq!(
            text,
            "written=3\nfailed=1\nfailed_case=case_0000_000_001:ConstraintUnsatisfiable after 5 attempts\n"
        );
        assert_eq!(Summary::parse(&text), Some(s));
        assert_eq!(Summary::parse("written=1\nfailed=2\n"), None);
    }
}
