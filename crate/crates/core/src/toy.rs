//! Synthetic abdominal phantoms for tests, benchmarks and demos.
//!
//! Each patient gets an elliptical body, a liver on image-left, a spine, a
//! spleen and a round tumour inside the liver. The three acquisitions differ
//! in tissue contrast and carry mild noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{self, BinaryMask, GrayImage, ImagingError};
use crate::manifest::{Acquisition, PatientRecord};

/// Tissue intensities per acquisition: background, body, liver, tumour, spine, spleen.
fn contrast(a: Acquisition) -> [f64; 6] {
    match a {
        Acquisition::T1Arterial => [5.0, 80.0, 125.0, 205.0, 175.0, 110.0],
        Acquisition::T1Portal => [5.0, 85.0, 150.0, 95.0, 170.0, 140.0],
        Acquisition::T2 => [10.0, 60.0, 55.0, 185.0, 40.0, 150.0],
    }
}

struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    fn contains(&self, x: u32, y: u32) -> bool {
        let u = (x as f64 - self.cx) / self.rx;
        let v = (y as f64 - self.cy) / self.ry;
        u * u + v * v <= 1.0
    }
}

/// One phantom patient's rasters.
pub struct Phantom {
    pub t1_arterial: GrayImage,
    pub t1_portal: GrayImage,
    pub t2: GrayImage,
    pub tumor: BinaryMask,
    pub liver: BinaryMask,
}

pub fn phantom(size: u32, seed: u64) -> Phantom {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let mut jitter = |scale: f64| rng.random_range(-scale..=scale) * s;
    let body = Ellipse {
        cx: 0.5 * s,
        cy: 0.52 * s,
        rx: 0.44 * s,
        ry: 0.36 * s,
    };
    let liver = Ellipse {
        cx: 0.32 * s + jitter(0.02),
        cy: 0.42 * s + jitter(0.02),
        rx: 0.19 * s + jitter(0.015),
        ry: 0.16 * s + jitter(0.015),
    };
    let tumor = Ellipse {
        cx: liver.cx + jitter(0.05),
        cy: liver.cy + jitter(0.04),
        rx: 0.07 * s + jitter(0.01),
        ry: 0.06 * s + jitter(0.01),
    };
    let spine = Ellipse {
        cx: 0.5 * s,
        cy: 0.78 * s,
        rx: 0.06 * s,
        ry: 0.06 * s,
    };
    let spleen = Ellipse {
        cx: 0.72 * s + jitter(0.02),
        cy: 0.45 * s + jitter(0.02),
        rx: 0.08 * s,
        ry: 0.1 * s,
    };

    let n = size as usize * size as usize;
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-8.0..=8.0)).collect();
    let tissue = |x: u32, y: u32| -> usize {
        if !body.contains(x, y) {
            0
        } else if tumor.contains(x, y) && liver.contains(x, y) {
            3
        } else if liver.contains(x, y) {
            2
        } else if spine.contains(x, y) {
            4
        } else if spleen.contains(x, y) {
            5
        } else {
            1
        }
    };
    let render = |a: Acquisition| {
        let levels = contrast(a);
        GrayImage::from_fn(size, size, |x, y| {
            let v = levels[tissue(x, y)] + noise[y as usize * size as usize + x as usize];
            v.round().clamp(0.0, 255.0) as u8
        })
    };
    Phantom {
        t1_arterial: render(Acquisition::T1Arterial),
        t1_portal: render(Acquisition::T1Portal),
        t2: render(Acquisition::T2),
        tumor: BinaryMask::from_fn(size, size, |x, y| tumor.contains(x, y) && liver.contains(x, y)),
        liver: BinaryMask::from_fn(size, size, |x, y| liver.contains(x, y)),
    }
}

/// Writes `patients` phantoms under `dir` plus `manifest.tsv` (relative
/// paths) and returns the manifest path.
pub fn write_dataset(dir: &Path, patients: usize, size: u32, seed: u64) -> Result<PathBuf, ImagingError> {
    let mut lines = vec!["# id\tt1_arterial\tt1_portal\tt2\ttumor_mask\tliver_mask".to_string()];
    for m in 0..patients {
        let id = format!("P{m:03}");
        let p = phantom(size, seed.wrapping_add(m as u64));
        let rel = |name: &str| PathBuf::from(&id).join(format!("{name}.png"));
        imaging::save_png(&p.t1_arterial, dir.join(rel("t1_arterial")))?;
        imaging::save_png(&p.t1_portal, dir.join(rel("t1_portal")))?;
        imaging::save_png(&p.t2, dir.join(rel("t2")))?;
        imaging::save_mask(&p.tumor, dir.join(rel("tumor_mask")))?;
        imaging::save_mask(&p.liver, dir.join(rel("liver_mask")))?;
        let record = PatientRecord {
            id: id.clone(),
            t1_arterial: rel("t1_arterial"),
            t1_portal: rel("t1_portal"),
            t2: rel("t2"),
            tumor_mask: rel("tumor_mask"),
            liver_mask: rel("liver_mask"),
        };
        lines.push(record.to_line());
    }
    let manifest = dir.join("manifest.tsv");
    fs::write(&manifest, lines.join("\n") + "\n").map_err(|source| ImagingError::Io {
        path: manifest.clone(),
        source,
    })?;
    Ok(manifest)
}
