//! Random geometric transforms of tumour masks with an anatomical placement
//! constraint.
//!
//! A transform is applied in a fixed order: horizontal flip, vertical flip,
//! zoom about the image centre, counter-clockwise rotation about the image
//! centre, integer translation. Output pixels are filled by inverse mapping
//! with nearest-neighbour sampling; anything that maps outside the source is
//! background.

use rand::Rng;
use thiserror::Error;

use crate::imaging::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("transformed mask left the frame entirely")]
    EmptyResult,
    #[error("no transform satisfied the placement constraints after {attempts} attempts")]
    ConstraintUnsatisfiable { attempts: u32 },
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One sampled geometric transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    pub zoom: f64,
    /// Degrees, counter-clockwise as displayed (y axis pointing down), in `[0, 360)`.
    pub rotation: f64,
    pub flip_h: bool,
    pub flip_v: bool,
    /// Pixels, +x right.
    pub dx: i32,
    /// Pixels, +y down.
    pub dy: i32,
}

impl TransformSpec {
    pub const IDENTITY: TransformSpec = TransformSpec {
        zoom: 1.0,
        rotation: 0.0,
        flip_h: false,
        flip_v: false,
        dx: 0,
        dy: 0,
    };

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.zoom.is_finite() && self.zoom > 0.0) {
            return Err(TransformError::InvalidParameter(format!(
                "zoom must be positive, got {}",
                self.zoom
            )));
        }
        if !(0.0..360.0).contains(&self.rotation) {
            return Err(TransformError::InvalidParameter(format!(
                "rotation must lie in [0, 360), got {}",
                self.rotation
            )));
        }
        Ok(())
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 || r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Placement region for the tumour centroid, as fractions of width/height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnatomicalRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for AnatomicalRegion {
    /// Image-left is patient-right in radiological display, where the liver sits.
    fn default() -> Self {
        Self {
            x_min: 0.08,
            x_max: 0.55,
            y_min: 0.15,
            y_max: 0.65,
        }
    }
}

impl AnatomicalRegion {
    pub const WHOLE_IMAGE: AnatomicalRegion = AnatomicalRegion {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 1.0,
    };

    pub fn validate(&self) -> Result<(), TransformError> {
        let ok = |lo: f64, hi: f64| 0.0 <= lo && lo < hi && hi <= 1.0;
        if ok(self.x_min, self.x_max) && ok(self.y_min, self.y_max) {
            Ok(())
        } else {
            Err(TransformError::InvalidParameter(format!(
                "region bounds must satisfy 0 <= min < max <= 1, got {self:?}"
            )))
        }
    }

    /// Whether pixel coordinate `(x, y)` lies in the region scaled to a
    /// `width`×`height` image (bounds inclusive, scaled by the full extent).
    pub fn contains(&self, x: f64, y: f64, width: u32, height: u32) -> bool {
        let (w, h) = (width as f64, height as f64);
        x >= self.x_min * w && x <= self.x_max * w && y >= self.y_min * h && y <= self.y_max * h
    }
}

/// Sampling ranges for [`TransformSpec`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRanges {
    pub zoom_min: f64,
    pub zoom_max: f64,
    /// Rotation is drawn uniformly from `[-rotation_max, rotation_max]` degrees.
    pub rotation_max: f64,
    pub allow_flip_h: bool,
    pub allow_flip_v: bool,
    pub translate_max: u32,
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self {
            zoom_min: 0.8,
            zoom_max: 1.2,
            rotation_max: 15.0,
            allow_flip_h: true,
            allow_flip_v: false,
            translate_max: 60,
        }
    }
}

impl TransformRanges {
    /// Ranges that only ever produce the identity transform.
    pub fn fixed() -> Self {
        Self {
            zoom_min: 1.0,
            zoom_max: 1.0,
            rotation_max: 0.0,
            allow_flip_h: false,
            allow_flip_v: false,
            translate_max: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.zoom_min > 0.0 && self.zoom_min <= self.zoom_max && self.zoom_max.is_finite()) {
            return Err(TransformError::InvalidParameter(format!(
                "zoom range must satisfy 0 < min <= max, got [{}, {}]",
                self.zoom_min, self.zoom_max
            )));
        }
        if !(self.rotation_max >= 0.0 && self.rotation_max.is_finite()) {
            return Err(TransformError::InvalidParameter(format!(
                "rotation_max must be >= 0, got {}",
                self.rotation_max
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TransformSpec {
        let zoom = if self.zoom_min == self.zoom_max {
            self.zoom_min
        } else {
            rng.random_range(self.zoom_min..=self.zoom_max)
        };
        let rotation = if self.rotation_max == 0.0 {
            0.0
        } else {
            normalize_degrees(rng.random_range(-self.rotation_max..=self.rotation_max))
        };
        let flip_h = self.allow_flip_h && rng.random_bool(0.5);
        let flip_v = self.allow_flip_v && rng.random_bool(0.5);
        let t = self.translate_max as i32;
        let (dx, dy) = if t == 0 {
            (0, 0)
        } else {
            (rng.random_range(-t..=t), rng.random_range(-t..=t))
        };
        TransformSpec {
            zoom,
            rotation,
            flip_h,
            flip_v,
            dx,
            dy,
        }
    }
}

/// Mean of foreground pixel coordinates (pixel centres at integers).
pub fn centroid(mask: &BinaryMask) -> Result<(f64, f64), TransformError> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in mask.foreground() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    if n == 0 {
        return Err(TransformError::EmptyMask);
    }
    Ok((sx as f64 / n as f64, sy as f64 / n as f64))
}

/// `(cos, sin)` of an angle in degrees, exact at multiples of 90°.
fn cos_sin_degrees(deg: f64) -> (f64, f64) {
    if deg % 90.0 == 0.0 {
        match (deg / 90.0) as i64 % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let (s, c) = deg.to_radians().sin_cos();
        (c, s)
    }
}

/// Applies `spec` to `mask`; the output has the input's dimensions.
pub fn apply_transform(
    mask: &BinaryMask,
    spec: &TransformSpec,
) -> Result<BinaryMask, TransformError> {
    spec.validate()?;
    if mask.is_empty() {
        return Err(TransformError::EmptyMask);
    }
    let (w, h) = mask.dims();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (cos, sin) = cos_sin_degrees(spec.rotation);
    let inv_zoom = 1.0 / spec.zoom;

    let mut data = vec![false; w as usize * h as usize];
    crate::exec::for_each_row(&mut data, w as usize, |y, row| {
        let py = y as f64 - spec.dy as f64;
        for (x, out) in row.iter_mut().enumerate() {
            let px = x as f64 - spec.dx as f64;
            let (u, v) = (px - cx, py - cy);
            let (ru, rv) = (cos * u - sin * v, sin * u + cos * v);
            let (zx, zy) = if spec.zoom == 1.0 {
                (cx + ru, cy + rv)
            } else {
                (cx + ru * inv_zoom, cy + rv * inv_zoom)
            };
            let sx = (zx + 0.5).floor();
            let sy = (zy + 0.5).floor();
            if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
                continue;
            }
            let mut sx = sx as u32;
            let mut sy = sy as u32;
            if spec.flip_v {
                sy = h - 1 - sy;
            }
            if spec.flip_h {
                sx = w - 1 - sx;
            }
            *out = mask.get(sx, sy);
        }
    });
    let out = BinaryMask::new(w, h, data).expect("dimensions preserved");
    if out.is_empty() {
        return Err(TransformError::EmptyResult);
    }
    Ok(out)
}

/// Limits for [`sample_constrained`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerOptions {
    pub max_attempts: u32,
    /// Minimum `area(transformed ∩ liver)` for a candidate to be accepted.
    pub min_overlap: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            max_attempts: 1000,
            min_overlap: 1,
        }
    }
}

/// An accepted constrained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub spec: TransformSpec,
    pub mask: BinaryMask,
    /// 1-based index of the accepted attempt.
    pub attempts: u32,
}

/// Whether a transformed mask satisfies the placement predicate: centroid in
/// `region` and at least `min_overlap` pixels shared with `liver`.
pub fn placement_ok(
    transformed: &BinaryMask,
    region: &AnatomicalRegion,
    liver: &BinaryMask,
    min_overlap: usize,
) -> bool {
    let Ok((cx, cy)) = centroid(transformed) else {
        return false;
    };
    if !region.contains(cx, cy, transformed.width(), transformed.height()) {
        return false;
    }
    let overlap = transformed
        .data()
        .iter()
        .zip(liver.data())
        .filter(|(&a, &b)| a && b)
        .count();
    overlap >= min_overlap.max(1)
}

/// Rejection-samples a transform whose output satisfies [`placement_ok`].
///
/// All randomness comes from `rng`; the same generator state and inputs give
/// the same result.
pub fn sample_constrained<R: Rng + ?Sized>(
    rng: &mut R,
    mask: &BinaryMask,
    ranges: &TransformRanges,
    region: &AnatomicalRegion,
    liver: &BinaryMask,
    options: SamplerOptions,
) -> Result<Placement, TransformError> {
    ranges.validate()?;
    region.validate()?;
    if mask.dims() != liver.dims() {
        return Err(TransformError::DimensionMismatch(mask.dims(), liver.dims()));
    }
    if mask.is_empty() || liver.is_empty() {
        return Err(TransformError::EmptyMask);
    }
    for attempt in 1..=options.max_attempts {
        let spec = ranges.sample(rng);
        let transformed = match apply_transform(mask, &spec) {
            Ok(m) => m,
            Err(TransformError::EmptyResult) => continue,
            Err(e) => return Err(e),
        };
        if placement_ok(&transformed, region, liver, options.min_overlap) {
            return Ok(Placement {
                spec,
                mask: transformed,
                attempts: attempt,
            });
        }
    }
    Err(TransformError::ConstraintUnsatisfiable {
        attempts: options.max_attempts,
    })
}
