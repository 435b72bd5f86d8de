//! Test-only oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use sha2::{Digest, Sha256};

use liversynth::orchestrator::PipelineConfig;
use liversynth::{toy, BinaryMask, GrayImage};

/// Scalar Canny written straight from the stage definitions: 2-D loops,
/// atan2 direction bins, and hysteresis by fixed-point relaxation instead of
/// a flood fill.
pub fn oracle_canny(img: &GrayImage, low: u8, high: u8, sigma: f64, scale: f64) -> Vec<bool> {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let cl = |v: i64, n: i64| v.max(0).min(n - 1);

    // 1. stretch
    let lo = *img.data().iter().min().unwrap() as u32;
    let hi = *img.data().iter().max().unwrap() as u32;
    let mut s = vec![0.0f64; (w * h) as usize];
    for (i, &v) in img.data().iter().enumerate() {
        s[i] = if lo == hi || (lo == 0 && hi == 255) {
            v as f64
        } else {
            (((v as u32 - lo) * 255 + (hi - lo) / 2) / (hi - lo)) as f64
        };
    }

    // 2. blur
    let mut k = [0.0f64; 5];
    let mut ksum = 0.0;
    for t in -2i64..=2 {
        let e = (-((t * t) as f64) / (2.0 * sigma * sigma)).exp();
        k[(t + 2) as usize] = e;
    }
    for v in k {
        ksum += v;
    }
    for v in k.iter_mut() {
        *v /= ksum;
    }
    let mut tmp = vec![0.0f64; s.len()];
    for y in 0..h {
        for x in 0..w {
            let mut a = 0.0;
            for t in -2i64..=2 {
                a += k[(t + 2) as usize] * s[idx(cl(x + t, w), y)];
            }
            tmp[idx(x, y)] = a;
        }
    }
    let mut b = vec![0.0f64; s.len()];
    for y in 0..h {
        for x in 0..w {
            let mut a = 0.0;
            for t in -2i64..=2 {
                a += k[(t + 2) as usize] * tmp[idx(x, cl(y + t, h))];
            }
            b[idx(x, y)] = a;
        }
    }

    // 3. sobel
    let mut mag = vec![0.0f64; s.len()];
    let mut bin = vec![0u8; s.len()];
    for y in 0..h {
        for x in 0..w {
            let p = |dx: i64, dy: i64| b[idx(cl(x + dx, w), cl(y + dy, h))];
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            mag[idx(x, y)] = (gx * gx + gy * gy).sqrt() * scale;
            let mut deg = gy.atan2(gx).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            if deg >= 180.0 {
                deg -= 180.0;
            }
            bin[idx(x, y)] = if !(22.5..157.5).contains(&deg) {
                0
            } else if deg < 67.5 {
                45
            } else if deg < 112.5 {
                90
            } else {
                135
            };
        }
    }

    // 4. nms
    let m_at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            mag[idx(x, y)]
        }
    };
    let mut thin = vec![0.0f64; s.len()];
    for y in 0..h {
        for x in 0..w {
            let (ax, ay) = match bin[idx(x, y)] {
                0 => (1, 0),
                45 => (1, 1),
                90 => (0, 1),
                _ => (-1, 1),
            };
            let m = mag[idx(x, y)];
            if m > m_at(x - ax, y - ay) && m >= m_at(x + ax, y + ay) {
                thin[idx(x, y)] = m;
            }
        }
    }

    // 5-6. thresholds and hysteresis
    let mut edge: Vec<bool> = thin.iter().map(|&m| m >= high as f64).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if edge[idx(x, y)] || thin[idx(x, y)] < low as f64 {
                    continue;
                }
                let mut near = false;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h && edge[idx(nx, ny)] {
                            near = true;
                        }
                    }
                }
                if near {
                    edge[idx(x, y)] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    edge
}

/// Deals cases one at a time round-robin over patients, each patient taking
/// its next `(s, p)` slot, then sorts.
pub fn brute_force_plan(m: usize, s: u32, p: u32, target: usize) -> Vec<(usize, u32, u32)> {
    let slots: Vec<Vec<(u32, u32)>> = (0..m)
        .map(|_| {
            let mut v = Vec::new();
            for si in 0..s {
                for pi in 0..p {
                    v.push((si, pi));
                }
            }
            v
        })
        .collect();
    let mut next = vec![0usize; m];
    let mut out = Vec::new();
    let mut patient = 0;
    while out.len() < target {
        let (si, pi) = slots[patient][next[patient]];
        next[patient] += 1;
        out.push((patient, si, pi));
        patient = (patient + 1) % m;
    }
    out.sort();
    out
}

/// SHA-256 over every file's relative path and contents, in sorted order.
pub fn hash_tree(root: &Path) -> String {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for e in entries {
            if e.is_dir() {
                walk(&e, out);
            } else {
                out.push(e);
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut hasher = Sha256::new();
    for f in files {
        hasher.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(&f).unwrap());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Toy phantom dataset under `dir` and a config writing to `dir/out`.
pub fn toy_config(dir: &Path, patients: usize, size: u32, target: u32, seed: u64) -> PipelineConfig {
    let manifest = toy::write_dataset(dir, patients, size, 1000).unwrap();
    let mut cfg = PipelineConfig::new(manifest, dir.join("out"));
    cfg.plan.working_size = size;
    cfg.plan.target_cases = target;
    cfg.plan.master_seed = seed;
    cfg.ranges.translate_max = size * 60 / 256;
    cfg.min_tumor_area = 8;
    cfg
}

/// Union of random disks near the image centre.
pub fn random_blob<R: Rng>(rng: &mut R, w: u32, h: u32, max_r: i32) -> BinaryMask {
    let disks: Vec<(i32, i32, i32)> = (0..rng.random_range(1..=4))
        .map(|_| {
            (
                w as i32 / 2 + rng.random_range(-max_r..=max_r),
                h as i32 / 2 + rng.random_range(-max_r..=max_r),
                rng.random_range(max_r / 2..=max_r),
            )
        })
        .collect();
    BinaryMask::from_fn(w, h, |x, y| {
        disks
            .iter()
            .any(|&(cx, cy, r)| (x as i32 - cx).pow(2) + (y as i32 - cy).pow(2) <= r * r)
    })
}

pub fn random_image<R: Rng>(rng: &mut R, w: u32, h: u32) -> GrayImage {
    let data = (0..w * h).map(|_| rng.random()).collect();
    GrayImage::new(w, h, data).unwrap()
}

/// Random image with some spatial structure (blocks plus noise).
pub fn structured_image<R: Rng>(rng: &mut R, w: u32, h: u32) -> GrayImage {
    let block: Vec<u8> = (0..16).map(|_| rng.random()).collect();
    let noise: Vec<i16> = (0..w * h).map(|_| rng.random_range(-20..=20)).collect();
    GrayImage::from_fn(w, h, |x, y| {
        let b = block[((y * 4 / h) * 4 + x * 4 / w) as usize] as i16;
        (b + noise[(y * w + x) as usize]).clamp(0, 255) as u8
    })
}
