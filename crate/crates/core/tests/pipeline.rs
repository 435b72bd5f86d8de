mod common;

use std::collections::HashSet;
use std::fs;

use liversynth::manifest::{CaseMeta, CONDITIONING_FILE, META_FILE, SUMMARY_FILE, TUMOR_MASK_FILE};
use liversynth::orchestrator::seed::split_seed;
use liversynth::orchestrator::{case_dirs, run_stage1, verify, PipelineConfig, ViolationKind};
use liversynth::{imaging, AnatomicalRegion, GrayImage};

#[test]
fn single_case_run_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 1, 64, 1, 3);
    cfg.plan.s_per_patient = 1;
    cfg.plan.p_per_patient = 1;
    let summary = run_stage1(&cfg).unwrap();
    assert_eq!((summary.written, summary.failed.len()), (1, 0));

    let dirs = case_dirs(&cfg.output_dir).unwrap();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].ends_with("case_0000_000_000"));
    let mut files: Vec<String> = fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, [CONDITIONING_FILE, META_FILE, TUMOR_MASK_FILE]);
    assert_eq!(
        fs::read_to_string(cfg.output_dir.join(SUMMARY_FILE)).unwrap(),
        "written=1\nfailed=0\n"
    );

    let meta = CaseMeta::parse(&fs::read_to_string(dirs[0].join(META_FILE)).unwrap()).unwrap();
    assert_eq!(meta.source_patient, "P000");
    assert_eq!(meta.seed, split_seed(3, 0));
    let keys: Vec<String> = fs::read_to_string(dirs[0].join(META_FILE))
        .unwrap()
        .lines()
        .map(|l| l.split('=').next().unwrap().to_string())
        .collect();
    assert_eq!(
        keys,
        ["source_patient", "seed", "zoom", "rotation", "flip_h", "flip_v", "dx", "dy", "low", "high"]
    );
    assert!(verify(&cfg).unwrap().passed());
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 2, 48, 10, 99);
    let mut hashes = Vec::new();
    for threads in [1, 3, 8] {
        cfg.threads = threads;
        cfg.output_dir = tmp.path().join(format!("out{threads}"));
        run_stage1(&cfg).unwrap();
        hashes.push(common::hash_tree(&cfg.output_dir));
    }
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn different_seeds_give_different_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 2, 48, 6, 1);
    cfg.output_dir = tmp.path().join("a");
    run_stage1(&cfg).unwrap();
    cfg.plan.master_seed = 2;
    cfg.output_dir = tmp.path().join("b");
    run_stage1(&cfg).unwrap();
    assert_ne!(common::hash_tree(&tmp.path().join("a")), common::hash_tree(&tmp.path().join("b")));
}

#[test]
fn unreachable_region_records_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 2, 48, 6, 5);
    cfg.region = AnatomicalRegion {
        x_min: 0.9,
        x_max: 1.0,
        y_min: 0.9,
        y_max: 1.0,
    };
    cfg.max_attempts = 50;
    let summary = run_stage1(&cfg).unwrap();
    assert_eq!(summary.written, 0);
    assert_eq!(summary.failed.len(), 6);
    assert!(summary.failed.iter().all(|(_, r)| r.contains("ConstraintUnsatisfiable")));
    let text = fs::read_to_string(cfg.output_dir.join(SUMMARY_FILE)).unwrap();
    assert!(text.starts_with("written=0\nfailed=6\nfailed_case=case_0000_000_000:"));
    assert!(case_dirs(&cfg.output_dir).unwrap().is_empty());
    assert!(verify(&cfg).unwrap().passed());
}

#[test]
fn written_plus_failed_is_target() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 3, 48, 12, 8);
    // A tight region so that some but not necessarily all cases fail.
    cfg.region = AnatomicalRegion {
        x_min: 0.3,
        x_max: 0.34,
        y_min: 0.4,
        y_max: 0.44,
    };
    cfg.max_attempts = 20;
    let summary = run_stage1(&cfg).unwrap();
    assert_eq!(summary.written + summary.failed.len(), 12);
    assert_eq!(case_dirs(&cfg.output_dir).unwrap().len(), summary.written);
    assert!(verify(&cfg).unwrap().passed());
}

fn fresh_run(tmp: &std::path::Path) -> PipelineConfig {
    let cfg = common::toy_config(tmp, 2, 48, 4, 21);
    run_stage1(&cfg).unwrap();
    assert!(verify(&cfg).unwrap().passed());
    cfg
}

#[test]
fn verify_catches_tampered_pixel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fresh_run(tmp.path());
    let case = &case_dirs(&cfg.output_dir).unwrap()[0];
    let path = case.join(CONDITIONING_FILE);
    let img = imaging::load_png(&path).unwrap();
    let (w, h) = img.dims();
    let mut data = img.into_data();
    data[0] = 77;
    imaging::save_png(&GrayImage::new(w, h, data).unwrap(), &path).unwrap();
    let report = verify(&cfg).unwrap();
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].kind, ViolationKind::Alphabet);
}

#[test]
fn verify_catches_flipped_tumor_pixel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fresh_run(tmp.path());
    let case = &case_dirs(&cfg.output_dir).unwrap()[1];
    for file in [CONDITIONING_FILE, TUMOR_MASK_FILE] {
        let path = case.join(file);
        let img = imaging::load_png(&path).unwrap();
        let (w, h) = img.dims();
        let mut data = img.into_data();
        let i = data.iter().position(|&v| v != 0).unwrap();
        data[i] = 0;
        imaging::save_png(&GrayImage::new(w, h, data).unwrap(), &path).unwrap();
    }
    let kinds: Vec<_> = verify(&cfg).unwrap().violations.into_iter().map(|v| v.kind).collect();
    assert!(!kinds.is_empty());
    assert!(kinds
        .iter()
        .all(|k| matches!(k, ViolationKind::MaskMismatch | ViolationKind::Consistency)));
}

#[test]
fn verify_catches_missing_meta_and_summary_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fresh_run(tmp.path());
    let case = &case_dirs(&cfg.output_dir).unwrap()[0];
    fs::remove_file(case.join(META_FILE)).unwrap();
    let report = verify(&cfg).unwrap();
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].kind, ViolationKind::Incomplete);

    fs::remove_dir_all(case).unwrap();
    let report = verify(&cfg).unwrap();
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].kind, ViolationKind::Summary);
}

#[test]
fn verify_catches_edited_transform() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fresh_run(tmp.path());
    let case = &case_dirs(&cfg.output_dir).unwrap()[0];
    let path = case.join(META_FILE);
    let mut meta = CaseMeta::parse(&fs::read_to_string(&path).unwrap()).unwrap();
    meta.transform.dx += 3;
    fs::write(&path, meta.to_text()).unwrap();
    let report = verify(&cfg).unwrap();
    assert!(!report.passed());
    assert!(report
        .violations
        .iter()
        .all(|v| matches!(v.kind, ViolationKind::Consistency | ViolationKind::Centroid)));
}

#[test]
fn case_seeds_are_distinct() {
    for master in [0u64, 1, u64::MAX] {
        let mut seen = HashSet::with_capacity(1_000_000);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(split_seed(master, i)), "collision at master {master} index {i}");
        }
    }
}

#[test]
fn config_text_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 1, 32, 2, 12345);
    cfg.ranges.zoom_min = 0.85;
    cfg.region.x_max = 0.6;
    cfg.threads = 4;
    let text = cfg.to_text();
    let back = PipelineConfig::parse(&text, tmp.path()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn infeasible_plan_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = common::toy_config(tmp.path(), 2, 32, 100, 0);
    cfg.min_tumor_area = 4;
    let err = run_stage1(&cfg).unwrap_err();
    assert!(err.to_string().contains("100"), "{err}");
    assert!(!cfg.output_dir.exists());
}
