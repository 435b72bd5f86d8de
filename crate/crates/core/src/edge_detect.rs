//! Canny edge extraction with randomly drawn hysteresis thresholds.
//!
//! Stages, in order:
//!
//! 1. min-max stretch to `[0, 255]` (integer, round-half-up) unless the image
//!    already spans that range or is constant;
//! 2. separable 5-tap Gaussian blur (horizontal pass, then vertical), edge
//!    clamped, taps accumulated from offset −2 to +2;
//! 3. 3×3 Sobel on the blurred image, edge clamped; magnitude
//!    `sqrt(gx² + gy²) · magnitude_scale`; direction quantized to 0/45/90/135°;
//! 4. non-maximum suppression: a pixel survives iff its magnitude is `>` the
//!    neighbour behind it and `>=` the neighbour ahead of it along the
//!    gradient (out-of-frame neighbours count as 0);
//! 5. double threshold: `>= high` strong, `>= low` weak;
//! 6. hysteresis: weak pixels 8-connected (transitively) to a strong pixel.
//!
//! The Sobel magnitude is scaled by 1/4 by default so that the 30–120
//! threshold range is commensurate with 8-bit intensity steps.

use rand::Rng;
use thiserror::Error;

use crate::imaging::GrayImage;

pub const THRESHOLD_MIN: u8 = 30;
pub const THRESHOLD_MAX: u8 = 120;

/// Smallest accepted side length (the Gaussian footprint).
pub const MIN_SIDE: u32 = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("image {0}x{1} is smaller than the 5x5 Gaussian footprint")]
    ImageTooSmall(u32, u32),
    #[error("invalid threshold pair ({low}, {high}): need {THRESHOLD_MIN} <= low < high <= {THRESHOLD_MAX}")]
    InvalidThresholds { low: u8, high: u8 },
    #[error("invalid canny parameter: {0}")]
    InvalidParameter(String),
}

/// Hysteresis thresholds, `30 <= low < high <= 120`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThresholdPair {
    low: u8,
    high: u8,
}

impl ThresholdPair {
    pub fn new(low: u8, high: u8) -> Result<Self, EdgeError> {
        if THRESHOLD_MIN <= low && low < high && high <= THRESHOLD_MAX {
            Ok(Self { low, high })
        } else {
            Err(EdgeError::InvalidThresholds { low, high })
        }
    }

    pub fn low(&self) -> u8 {
        self.low
    }

    pub fn high(&self) -> u8 {
        self.high
    }
}

/// Draws `count` threshold pairs: two independent uniform integers in
/// `[30, 120]`, redrawn while equal, sorted into `(low, high)`.
pub fn sample_thresholds<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<ThresholdPair> {
    (0..count)
        .map(|_| loop {
            let a = rng.random_range(THRESHOLD_MIN..=THRESHOLD_MAX);
            let b = rng.random_range(THRESHOLD_MIN..=THRESHOLD_MAX);
            if a != b {
                break ThresholdPair {
                    low: a.min(b),
                    high: a.max(b),
                };
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    pub magnitude_scale: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            magnitude_scale: 0.25,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<(), EdgeError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(EdgeError::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.magnitude_scale.is_finite() && self.magnitude_scale > 0.0) {
            return Err(EdgeError::InvalidParameter(format!(
                "magnitude_scale must be positive, got {}",
                self.magnitude_scale
            )));
        }
        Ok(())
    }

    /// Normalized 5-tap kernel for offsets −2..=2.
    pub fn kernel(&self) -> [f64; 5] {
        let mut k = [0.0; 5];
        let two_var = 2.0 * self.sigma * self.sigma;
        for (i, w) in k.iter_mut().enumerate() {
            let d = i as f64 - 2.0;
            *w = (-(d * d) / two_var).exp();
        }
        let sum: f64 = k.iter().sum();
        k.iter_mut().for_each(|w| *w /= sum);
        k
    }
}

/// Edge pixels plus the thresholds that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    data: Vec<bool>,
    low: u8,
    high: u8,
}

impl EdgeMap {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn low(&self) -> u8 {
        self.low
    }

    pub fn high(&self) -> u8 {
        self.high
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Builds an edge map from raw pixels (used by tests and fixtures).
    pub fn from_raw(width: u32, height: u32, data: Vec<bool>, pair: ThresholdPair) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        Self {
            width,
            height,
            data,
            low: pair.low,
            high: pair.high,
        }
    }
}

/// Intermediate Canny buffers, row-major `f64` per pixel.
#[derive(Debug, Clone)]
pub struct CannyTrace {
    /// Scaled gradient magnitude.
    pub magnitude: Vec<f64>,
    /// Magnitude after non-maximum suppression (suppressed pixels are 0).
    pub thinned: Vec<f64>,
    pub edges: EdgeMap,
}

pub fn canny(image: &GrayImage, pair: ThresholdPair) -> Result<EdgeMap, EdgeError> {
    canny_with(image, pair, &CannyParams::default())
}

pub fn canny_with(
    image: &GrayImage,
    pair: ThresholdPair,
    params: &CannyParams,
) -> Result<EdgeMap, EdgeError> {
    canny_trace(image, pair, params).map(|t| t.edges)
}

/// Runs all stages and returns the intermediate buffers alongside the edges.
pub fn canny_trace(
    image: &GrayImage,
    pair: ThresholdPair,
    params: &CannyParams,
) -> Result<CannyTrace, EdgeError> {
    params.validate()?;
    let (w, h) = image.dims();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(EdgeError::ImageTooSmall(w, h));
    }
    let stretched = stretch(image.data());
    let blurred = blur(&stretched, w as usize, h as usize, &params.kernel());
    let (magnitude, direction) = sobel(&blurred, w as usize, h as usize, params.magnitude_scale);
    let thinned = suppress(&magnitude, &direction, w as usize, h as usize);
    let data = hysteresis(&thinned, w as usize, h as usize, pair.low as f64, pair.high as f64);
    Ok(CannyTrace {
        magnitude,
        thinned,
        edges: EdgeMap {
            width: w,
            height: h,
            data,
            low: pair.low,
            high: pair.high,
        },
    })
}

fn stretch(data: &[u8]) -> Vec<f64> {
    let min = *data.iter().min().expect("non-empty raster");
    let max = *data.iter().max().expect("non-empty raster");
    if min == max || (min == 0 && max == 255) {
        return data.iter().map(|&v| v as f64).collect();
    }
    let range = (max - min) as u32;
    data.iter()
        .map(|&v| (((v - min) as u32 * 255 + range / 2) / range) as f64)
        .collect()
}

fn blur(src: &[f64], w: usize, h: usize, kernel: &[f64; 5]) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    crate::exec::for_each_row(&mut tmp, w, |y, row| {
        let line = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - 2).clamp(0, w as isize - 1) as usize;
                acc += k * line[sx];
            }
            *out = acc;
        }
    });
    let mut out = vec![0.0; w * h];
    crate::exec::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sy = (y as isize + i as isize - 2).clamp(0, h as isize - 1) as usize;
                acc += k * tmp[sy * w + x];
            }
            *o = acc;
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Horizontal,
    Diagonal,
    Vertical,
    AntiDiagonal,
}

impl Direction {
    /// Offset of the neighbour ahead along the gradient (y down).
    fn ahead(self) -> (isize, isize) {
        match self {
            Direction::Horizontal => (1, 0),
            Direction::Diagonal => (1, 1),
            Direction::Vertical => (0, 1),
            Direction::AntiDiagonal => (-1, 1),
        }
    }
}

const TAN_22_5: f64 = 0.414_213_562_373_095_03;
const TAN_67_5: f64 = 2.414_213_562_373_095;

fn quantize(gx: f64, gy: f64) -> Direction {
    let (ax, ay) = (gx.abs(), gy.abs());
    if ay < ax * TAN_22_5 {
        Direction::Horizontal
    } else if ay >= ax * TAN_67_5 {
        Direction::Vertical
    } else if (gx > 0.0) == (gy > 0.0) {
        Direction::Diagonal
    } else {
        Direction::AntiDiagonal
    }
}

fn sobel(src: &[f64], w: usize, h: usize, scale: f64) -> (Vec<f64>, Vec<Direction>) {
    let mut cells = vec![(0.0, Direction::Horizontal); w * h];
    crate::exec::for_each_row(&mut cells, w, |y, row| {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for (x, cell) in row.iter_mut().enumerate() {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let p = |xx: usize, yy: usize| src[yy * w + xx];
            let gx = (p(right, up) + 2.0 * p(right, y) + p(right, down))
                - (p(left, up) + 2.0 * p(left, y) + p(left, down));
            let gy = (p(left, down) + 2.0 * p(x, down) + p(right, down))
                - (p(left, up) + 2.0 * p(x, up) + p(right, up));
            let mag = (gx * gx + gy * gy).sqrt() * scale;
            *cell = (mag, quantize(gx, gy));
        }
    });
    cells.into_iter().unzip()
}

fn suppress(mag: &[f64], dir: &[Direction], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0; w * h];
    crate::exec::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let m = mag[i];
            let (ox, oy) = dir[i].ahead();
            let (xi, yi) = (x as isize, y as isize);
            let ahead = at(xi + ox, yi + oy);
            let behind = at(xi - ox, yi - oy);
            if m > behind && m >= ahead {
                *o = m;
            }
        }
    });
    out
}

fn hysteresis(thinned: &[f64], w: usize, h: usize, low: f64, high: f64) -> Vec<bool> {
    let mut edges = vec![false; w * h];
    let mut stack = Vec::new();
    for seed in 0..w * h {
        if edges[seed] || thinned[seed] < high {
            continue;
        }
        edges[seed] = true;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !edges[j] && thinned[j] >= low {
                        edges[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    edges
}
