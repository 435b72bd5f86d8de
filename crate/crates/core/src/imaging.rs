//! Raster types, PNG I/O and resizing shared by every pipeline stage.
//!
//! PNG is the only supported on-disk format. Inputs may be 8- or 16-bit
//! grayscale, paletted or RGB(A); everything is reduced to one 8-bit channel
//! on load. Output is always 8-bit grayscale.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Intensities strictly above this value are foreground when binarizing.
pub const MASK_THRESHOLD: u8 = 127;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Foreground is every pixel strictly above [`MASK_THRESHOLD`].
    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v > MASK_THRESHOLD).collect(),
        }
    }
}

/// Boolean raster, row-major, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self, ImagingError> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let img = GrayImage::from_fn(width, height, |x, y| if f(x, y) { 255 } else { 0 });
        img.to_mask()
    }

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

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Coordinates of foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// `{0, 255}` rendering.
    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
        }
    }
}

fn check_dims(width: u32, height: u32, len: usize) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::InvalidRaster(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    let expected = width as usize * height as usize;
    if len != expected {
        return Err(ImagingError::InvalidRaster(format!(
            "{width}x{height} raster needs {expected} pixels, got {len}"
        )));
    }
    Ok(())
}

/// Integer BT.601 luma.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((77 * r as u32 + 150 * g as u32 + 29 * b as u32) >> 8) as u8
}

/// Decodes a PNG into a single 8-bit channel.
///
/// 16-bit samples are divided by 257; colour inputs are reduced with [`luma`];
/// alpha is ignored.
pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ImagingError::FileNotFound(path.to_path_buf()),
        _ => ImagingError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let decode_err = |reason: String| ImagingError::Decode {
        path: path.to_path_buf(),
        reason,
    };

    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| decode_err(e.to_string()))?;
    buf.truncate(frame.buffer_size());

    let (width, height) = (frame.width, frame.height);
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(decode_err("palette was not expanded".into()));
        }
    };
    let wide = match frame.bit_depth {
        png::BitDepth::Eight => false,
        png::BitDepth::Sixteen => true,
        other => return Err(decode_err(format!("unsupported bit depth {other:?}"))),
    };
    let bytes_per_sample = if wide { 2 } else { 1 };
    let sample = |px: &[u8], c: usize| -> u8 {
        if wide {
            (u16::from_be_bytes([px[2 * c], px[2 * c + 1]]) / 257) as u8
        } else {
            px[c]
        }
    };

    let stride = channels * bytes_per_sample;
    let mut data = Vec::with_capacity(width as usize * height as usize);
    let row_len = width as usize * stride;
    for row in buf.chunks_exact(frame.line_size) {
        for px in row[..row_len].chunks_exact(stride) {
            let v = if channels >= 3 {
                luma(sample(px, 0), sample(px, 1), sample(px, 2))
            } else {
                sample(px, 0)
            };
            data.push(v);
        }
    }
    GrayImage::new(width, height, data).map_err(|e| decode_err(e.to_string()))
}

/// Loads a PNG and binarizes it at `> 127`.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask, ImagingError> {
    load_png(path).map(|img| img.to_mask())
}

/// Writes an 8-bit grayscale PNG, creating parent directories as needed.
pub fn save_png(image: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = File::create(path).map_err(io_err)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width, image.height);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(source) => io_err(source),
        other => io_err(std::io::Error::other(other.to_string())),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&image.data).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    save_png(&mask.to_image(), path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

/// Source coordinate of target index `i` under the half-pixel-centre mapping,
/// clamped to the source extent.
#[inline]
fn source_coord(i: u32, scale: f64, src_len: u32) -> f64 {
    ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64)
}

/// Resamples `image` to `w`×`h`.
///
/// Target pixel `i` samples source coordinate `(i + 0.5)·(src/dst) − 0.5`,
/// clamped to the image. Nearest rounds half-up; bilinear interpolates
/// between the clamped neighbours and rounds to the nearest integer.
pub fn resize(image: &GrayImage, w: u32, h: u32, mode: ResizeMode) -> GrayImage {
    assert!(w > 0 && h > 0, "target dimensions must be positive");
    if (w, h) == image.dims() {
        return image.clone();
    }
    let (sw, sh) = image.dims();
    let sx = sw as f64 / w as f64;
    let sy = sh as f64 / h as f64;
    let mut data = vec![0u8; w as usize * h as usize];
    crate::exec::for_each_row(&mut data, w as usize, |y, row| {
        let fy = source_coord(y as u32, sy, sh);
        match mode {
            ResizeMode::Nearest => {
                let ny = ((fy + 0.5).floor() as u32).min(sh - 1);
                for (x, out) in row.iter_mut().enumerate() {
                    let fx = source_coord(x as u32, sx, sw);
                    let nx = ((fx + 0.5).floor() as u32).min(sw - 1);
                    *out = image.get(nx, ny);
                }
            }
            ResizeMode::Bilinear => {
                let y0 = fy.floor() as u32;
                let y1 = (y0 + 1).min(sh - 1);
                let ty = fy - y0 as f64;
                for (x, out) in row.iter_mut().enumerate() {
                    let fx = source_coord(x as u32, sx, sw);
                    let x0 = fx.floor() as u32;
                    let x1 = (x0 + 1).min(sw - 1);
                    let tx = fx - x0 as f64;
                    let top = image.get(x0, y0) as f64 * (1.0 - tx) + image.get(x1, y0) as f64 * tx;
                    let bottom =
                        image.get(x0, y1) as f64 * (1.0 - tx) + image.get(x1, y1) as f64 * tx;
                    let v = top * (1.0 - ty) + bottom * ty;
                    *out = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
                }
            }
        }
    });
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

/// Nearest-neighbour resize through the `{0, 255}` rendering, re-binarized.
pub fn resize_mask(mask: &BinaryMask, w: u32, h: u32) -> BinaryMask {
    resize(&mask.to_image(), w, h, ResizeMode::Nearest).to_mask()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_png(
        path: &Path,
        w: u32,
        h: u32,
        color: png::ColorType,
        depth: png::BitDepth,
        palette: Option<Vec<u8>>,
        data: &[u8],
    ) {
        let file = File::create(path).unwrap();
        let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut writer = enc.write_header().unwrap();
        writer.write_image_data(data).unwrap();
        writer.finish().unwrap();
    }

    /// Scalar nearest resampler used as an oracle: explicit per-pixel loop.
    fn nearest_oracle(img: &GrayImage, w: u32, h: u32) -> Vec<u8> {
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let fx = (x as f64 + 0.5) * img.width() as f64 / w as f64 - 0.5;
                let fy = (y as f64 + 0.5) * img.height() as f64 / h as f64 - 0.5;
                let ix = (fx + 0.5).floor().max(0.0).min((img.width() - 1) as f64) as u32;
                let iy = (fy + 0.5).floor().max(0.0).min((img.height() - 1) as f64) as u32;
                out.push(img.get(ix, iy));
            }
        }
        out
    }

    #[test]
    fn zero_png_loads_as_zero_image() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.png");
        save_png(&GrayImage::filled(4, 4, 0), &p).unwrap();
        let img = load_png(&p).unwrap();
        assert_eq!(img.dims(), (4, 4));
        assert!(img.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn mask_threshold_is_strictly_above_127() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_png(&GrayImage::new(2, 2, vec![0, 127, 128, 255]).unwrap(), &p).unwrap();
        let m = load_mask(&p).unwrap();
        assert_eq!(m.data(), &[false, false, true, true]);
    }

    #[test]
    fn sixteen_bit_is_divided_by_257() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wide.png");
        let samples: [u16; 4] = [65535, 0, 257, 514];
        let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_be_bytes()).collect();
        write_raw_png(
            &p,
            2,
            2,
            png::ColorType::Grayscale,
            png::BitDepth::Sixteen,
            None,
            &bytes,
        );
        assert_eq!(load_png(&p).unwrap().data(), &[255, 0, 1, 2]);
    }

    #[test]
    fn rgb_and_palette_reduce_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = dir.path().join("rgb.png");
        write_raw_png(
            &rgb,
            2,
            1,
            png::ColorType::Rgb,
            png::BitDepth::Eight,
            None,
            &[255, 0, 0, 10, 200, 30],
        );
        assert_eq!(
            load_png(&rgb).unwrap().data(),
            &[luma(255, 0, 0), luma(10, 200, 30)]
        );
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(255, 255, 255), 255);

        let pal = dir.path().join("pal.png");
        write_raw_png(
            &pal,
            2,
            1,
            png::ColorType::Indexed,
            png::BitDepth::Eight,
            Some(vec![0, 0, 0, 0, 0, 255]),
            &[1, 0],
        );
        assert_eq!(load_png(&pal).unwrap().data(), &[luma(0, 0, 255), 0]);
    }

    #[test]
    fn missing_and_garbage_files_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_png(dir.path().join("nope.png")),
            Err(ImagingError::FileNotFound(_))
        ));
        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"definitely not a png").unwrap();
        assert!(matches!(load_png(&junk), Err(ImagingError::Decode { .. })));
    }

    #[test]
    fn random_image_round_trips() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let img = GrayImage::from_fn(256, 256, |_, _| 0);
        let data: Vec<u8> = (0..img.data().len()).map(|_| rng.random()).collect();
        let img = GrayImage::new(256, 256, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/dir/r.png");
        save_png(&img, &p).unwrap();
        assert_eq!(load_png(&p).unwrap(), img);
    }

    #[test]
    fn single_pixel_mask_saves_one_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.png");
        let mut m = BinaryMask::empty(8, 8);
        m.set(3, 5, true);
        save_mask(&m, &p).unwrap();
        let img = load_png(&p).unwrap();
        assert_eq!(img.data().iter().filter(|&&v| v == 255).count(), 1);
        assert_eq!(img.data().iter().filter(|&&v| v == 0).count(), 63);
        assert_eq!(img.get(3, 5), 255);
    }

    #[cfg(unix)]
    #[test]
    fn read_only_directory_is_io_error() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let ro = dir.path().join("ro");
        fs::create_dir(&ro).unwrap();
        fs::set_permissions(&ro, fs::Permissions::from_mode(0o555)).unwrap();
        let target = ro.join("x.png");
        // root ignores directory permissions
        if File::create(&target).is_ok() {
            return;
        }
        let res = save_png(&GrayImage::filled(2, 2, 1), &target);
        assert!(matches!(res, Err(ImagingError::Io { .. })));
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = GrayImage::from_fn(7, 5, |x, y| (x * 13 + y * 31) as u8);
        assert_eq!(resize(&img, 7, 5, ResizeMode::Bilinear), img);
        let c = GrayImage::filled(13, 9, 100);
        for mode in [ResizeMode::Nearest, ResizeMode::Bilinear] {
            for (w, h) in [(1, 1), (5, 3), (40, 17), (256, 256)] {
                let r = resize(&c, w, h, mode);
                assert!(r.data().iter().all(|&v| v == 100), "{mode:?} {w}x{h}");
            }
        }
    }

    #[test]
    fn nearest_two_by_two_to_one_pixel_picks_bottom_right() {
        let img = GrayImage::new(2, 2, vec![10, 20, 30, 40]).unwrap();
        let r = resize(&img, 1, 1, ResizeMode::Nearest);
        assert_eq!(r.data(), &nearest_oracle(&img, 1, 1)[..]);
        assert_eq!(r.data(), &[40]);
    }

    #[test]
    fn nearest_matches_scalar_oracle() {
        let img = GrayImage::from_fn(37, 23, |x, y| ((x * 7) ^ (y * 11)) as u8);
        for (w, h) in [(8, 8), (64, 50), (37, 23), (3, 91), (100, 1)] {
            let r = resize(&img, w, h, ResizeMode::Nearest);
            assert_eq!(r.data(), &nearest_oracle(&img, w, h)[..], "{w}x{h}");
        }
    }

    #[test]
    fn bilinear_midpoint() {
        // 2x1 -> 4x1: source coords -0.25(clamped 0), 0.25, 0.75, 1.25(clamped 1)
        let img = GrayImage::new(2, 1, vec![0, 200]).unwrap();
        let r = resize(&img, 4, 1, ResizeMode::Bilinear);
        assert_eq!(r.data(), &[0, 50, 150, 200]);
    }

    #[test]
    fn mask_resize_stays_binary() {
        let m = BinaryMask::from_fn(50, 40, |x, y| (x as i32 - 20).pow(2) + (y as i32 - 18).pow(2) < 120);
        let r = resize_mask(&m, 256, 256);
        assert_eq!(r.dims(), (256, 256));
        assert!(!r.is_empty());
        let img = r.to_image();
        assert!(img.data().iter().all(|&v| v == 0 || v == 255));
    }
}
