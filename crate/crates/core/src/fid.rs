//! Frechet distance between Gaussian fits of two embedding sets.
//!
//! `FID = ‖μ_R − μ_F‖² + Tr Σ_R + Tr Σ_F − 2 Tr (Σ_R Σ_F)^{1/2}`, with the
//! trace of the product square root evaluated as
//! `Tr (Σ_R^{1/2} Σ_F Σ_R^{1/2})^{1/2}` through two symmetric
//! eigendecompositions.
//!
//! Embeddings travel between tools in the EMB1 binary format: ASCII magic
//! `EMB1`, `n` and `d` as little-endian `u32`, then `n·d` little-endian `f64`
//! values in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::imaging::{self, GrayImage, ImagingError, ResizeMode};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// Relative tolerance on negative eigenvalues, scaled by the matrix trace.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Scores down to `-tolerance · (1 + Tr Σ_R + Tr Σ_F)` are clamped to 0.
pub const NEGATIVE_SCORE_TOLERANCE: f64 = 1e-8;

/// Dimension of [`surrogate_embed`] vectors.
pub const SURROGATE_DIM: usize = 128;
const HISTOGRAM_BINS: usize = 64;
const THUMBNAIL_SIDE: u32 = 8;

#[derive(Debug, Error)]
pub enum FidError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },
    #[error("embedding value at row {row}, column {col} is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} values for {n}x{d}, got {actual}")]
    ShapeMismatch {
        n: usize,
        d: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: bad magic {found:?}, expected \"EMB1\"")]
    BadMagic { path: PathBuf, found: Vec<u8> },
    #[error("{path}: truncated EMB1 file, expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: {extra} trailing bytes after EMB1 payload")]
    TrailingBytes { path: PathBuf, extra: usize },
    #[error("negative distance {0:e} beyond numerical tolerance")]
    NegativeDistance(f64),
    #[error("no PNG files in {0}")]
    EmptyDirectory(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// `n × d` row-major matrix of finite `f64` features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl EmbeddingSet {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self, FidError> {
        let expected = n.saturating_mul(d);
        if values.len() != expected {
            return Err(FidError::ShapeMismatch {
                n,
                d,
                expected,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FidError::NonFinite {
                row: i / d,
                col: i % d,
            });
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FidError> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(FidError::DimensionMismatch(d, bad.len()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d.max(1)).take(self.n)
    }

    /// Serializes into EMB1 bytes.
    pub fn to_emb1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses EMB1 bytes; `origin` only labels errors.
    pub fn from_emb1_bytes(bytes: &[u8], origin: &Path) -> Result<Self, FidError> {
        let path = origin.to_path_buf();
        if bytes.len() < 4 || &bytes[..4] != EMB1_MAGIC {
            if bytes.len() < 4 && EMB1_MAGIC.starts_with(bytes) {
                return Err(FidError::Truncated {
                    path,
                    expected: HEADER_LEN,
                    actual: bytes.len(),
                });
            }
            return Err(FidError::BadMagic {
                path,
                found: bytes[..bytes.len().min(4)].to_vec(),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(FidError::Truncated {
                path,
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = n
            .checked_mul(d)
            .and_then(|c| c.checked_mul(8))
            .and_then(|c| c.checked_add(HEADER_LEN))
            .unwrap_or(usize::MAX);
        if bytes.len() < expected {
            return Err(FidError::Truncated {
                path,
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(FidError::TrailingBytes {
                path,
                extra: bytes.len() - expected,
            });
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(n, d, values)
    }
}

pub fn read_emb1(path: impl AsRef<Path>) -> Result<EmbeddingSet, FidError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FidError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    EmbeddingSet::from_emb1_bytes(&bytes, path)
}

pub fn write_emb1(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<(), FidError> {
    let path = path.as_ref();
    fs::write(path, set.to_emb1_bytes()).map_err(|source| FidError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Mean vector and unbiased covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

pub fn fit_gaussian(set: &EmbeddingSet) -> Result<GaussianFit, FidError> {
    if set.n < 2 {
        return Err(FidError::TooFewSamples(set.n));
    }
    let x = DMatrix::from_row_slice(set.n, set.d, &set.values);
    let mean = DVector::from_iterator(set.d, x.column_iter().map(|c| c.sum() / set.n as f64));
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let c = centered.transpose() * &centered / (set.n as f64 - 1.0);
    let cov = (&c + c.transpose()) * 0.5;
    Ok(GaussianFit { mean, cov })
}

fn psd_eigenvalues(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), FidError> {
    let sym = (m + m.transpose()) * 0.5;
    let tolerance = -PSD_TOLERANCE * sym.trace().max(0.0);
    let dim = sym.nrows();
    let eig = sym.symmetric_eigen();
    let mut values = eig.eigenvalues;
    // eigenvalues this small are rounding noise; their square roots are not
    let noise_floor = dim as f64 * f64::EPSILON * values.amax();
    for v in values.iter_mut() {
        if *v < tolerance {
            return Err(FidError::NotPsd {
                eigenvalue: *v,
                tolerance,
            });
        }
        if *v <= noise_floor {
            *v = 0.0;
        }
    }
    Ok((values, eig.eigenvectors))
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FidError> {
    let (values, vectors) = psd_eigenvalues(m)?;
    let root = DMatrix::from_diagonal(&values.map(f64::sqrt));
    let s = &vectors * root * vectors.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `Tr (A B)^{1/2}` for symmetric PSD `A`, `B`.
pub fn sqrtm_trace(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, FidError> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(FidError::DimensionMismatch(a.nrows(), b.nrows()));
    }
    let root_a = sqrt_psd(a)?;
    let inner = &root_a * b * &root_a;
    let (values, _) = psd_eigenvalues(&inner)?;
    Ok(values.iter().map(|v| v.sqrt()).sum())
}

/// Frechet distance between two fits.
pub fn frechet_distance(real: &GaussianFit, fake: &GaussianFit) -> Result<f64, FidError> {
    if real.mean.len() != fake.mean.len() {
        return Err(FidError::DimensionMismatch(real.mean.len(), fake.mean.len()));
    }
    let mean_term = (&real.mean - &fake.mean).norm_squared();
    let cross = sqrtm_trace(&real.cov, &fake.cov)?;
    let score = mean_term + real.cov.trace() + fake.cov.trace() - 2.0 * cross;
    if score >= 0.0 {
        Ok(score)
    } else if score >= -NEGATIVE_SCORE_TOLERANCE * (1.0 + real.cov.trace() + fake.cov.trace()) {
        Ok(0.0)
    } else {
        Err(FidError::NegativeDistance(score))
    }
}

pub fn fid(real: &EmbeddingSet, fake: &EmbeddingSet) -> Result<f64, FidError> {
    if real.d != fake.d {
        return Err(FidError::DimensionMismatch(real.d, fake.d));
    }
    frechet_distance(&fit_gaussian(real)?, &fit_gaussian(fake)?)
}

/// Self-contained feature vector: 64-bin normalized intensity histogram
/// followed by the 8×8 nearest-resized thumbnail scaled to `[0, 1]`.
pub fn surrogate_embed(image: &GrayImage) -> Vec<f64> {
    let mut hist = vec![0.0; HISTOGRAM_BINS];
    for &v in image.data() {
        hist[v as usize * HISTOGRAM_BINS / 256] += 1.0;
    }
    let total = image.data().len() as f64;
    hist.iter_mut().for_each(|h| *h /= total);
    let thumb = imaging::resize(image, THUMBNAIL_SIDE, THUMBNAIL_SIDE, ResizeMode::Nearest);
    hist.extend(thumb.data().iter().map(|&v| v as f64 / 255.0));
    hist
}

/// PNG files directly inside `dir`, sorted by path.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>, FidError> {
    let io_err = |source| FidError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Embeds every PNG in `dir` with [`surrogate_embed`], rows in sorted path order.
pub fn embed_directory(dir: &Path) -> Result<EmbeddingSet, FidError> {
    let files = list_pngs(dir)?;
    if files.is_empty() {
        return Err(FidError::EmptyDirectory(dir.to_path_buf()));
    }
    let rows = crate::exec::map_ordered(&files, |p| imaging::load_png(p).map(|img| surrogate_embed(&img)));
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    EmbeddingSet::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<R: AsRef<[f64]>>(rows: &[R]) -> EmbeddingSet {
        EmbeddingSet::from_rows(&rows.iter().map(|r| r.as_ref().to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn fit_two_scalars() {
        let g = fit_gaussian(&set(&[&[0.0], &[2.0]])).unwrap();
        assert_eq!(g.mean[0], 1.0);
        // ((0-1)^2 + (2-1)^2) / (2-1)
        assert_eq!(g.cov[(0, 0)], 2.0);
    }

    #[test]
    fn identical_rows_have_zero_cov() {
        let g = fit_gaussian(&set(&[&[1.5, -2.0, 3.0]; 6])).unwrap();
        assert!(g.cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_standard_basis() {
        let g = fit_gaussian(&set(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(g.mean.as_slice(), &[0.5, 0.5]);
        assert_eq!(g.cov, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
    }

    #[test]
    fn one_sample_is_too_few() {
        assert!(matches!(
            fit_gaussian(&set(&[&[1.0, 2.0]])),
            Err(FidError::TooFewSamples(1))
        ));
    }

    #[test]
    fn sqrtm_trace_examples() {
        let i = DMatrix::<f64>::identity(5, 5);
        assert!((sqrtm_trace(&i, &i).unwrap() - 5.0).abs() < 1e-12);
        let a = DMatrix::from_element(1, 1, 4.0);
        let b = DMatrix::from_element(1, 1, 9.0);
        assert!((sqrtm_trace(&a, &b).unwrap() - 6.0).abs() < 1e-12);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 16.0]));
        assert!((sqrtm_trace(&a, &b).unwrap() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(sqrtm_trace(&a, &i), Err(FidError::NotPsd { .. })));
    }

    #[test]
    fn rank_deficient_self_distance_is_zero() {
        // 5 samples in 128 dimensions: covariance rank <= 4
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..128).map(|j| ((i * 31 + j * 17) % 23) as f64 / 23.0).collect())
            .collect();
        let s = EmbeddingSet::from_rows(&rows).unwrap();
        assert!(fid(&s, &s).unwrap().abs() < 1e-8);
    }

    #[test]
    fn fid_dimension_mismatch() {
        let a = set(&[&[0.0], &[1.0]]);
        let b = set(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(fid(&a, &b), Err(FidError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn emb1_bytes_layout() {
        let s = set(&[&[1.0, 2.0], &[3.0, -0.5]]);
        let b = s.to_emb1_bytes();
        assert_eq!(&b[..4], b"EMB1");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..20], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 12 + 4 * 8);
        assert_eq!(EmbeddingSet::from_emb1_bytes(&b, Path::new("x")).unwrap(), s);
    }

    #[test]
    fn emb1_rejects_malformed() {
        let s = set(&[&[1.0, 2.0], &[3.0, 4.0]]).to_emb1_bytes();
        let p = Path::new("f.emb1");
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&s[..s.len() - 1], p),
            Err(FidError::Truncated { .. })
        ));
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&s[..7], p),
            Err(FidError::Truncated { .. })
        ));
        let mut bad = s.clone();
        bad[0] = b'X';
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&bad, p),
            Err(FidError::BadMagic { .. })
        ));
        let mut long = s.clone();
        long.push(0);
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&long, p),
            Err(FidError::TrailingBytes { extra: 1, .. })
        ));
        let mut nan = s;
        nan[12..20].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&nan, p),
            Err(FidError::NonFinite { row: 0, col: 0 })
        ));
    }

    #[test]
    fn surrogate_extremes() {
        let zero = surrogate_embed(&GrayImage::filled(16, 16, 0));
        assert_eq!(zero.len(), SURROGATE_DIM);
        assert_eq!(zero[0], 1.0);
        assert!(zero[1..].iter().all(|&v| v == 0.0));
        let full = surrogate_embed(&GrayImage::filled(16, 16, 255));
        assert_eq!(full[63], 1.0);
        assert!(full[..63].iter().all(|&v| v == 0.0));
        assert!(full[64..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn surrogate_checkerboard() {
        let img = GrayImage::from_fn(256, 256, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        let e = surrogate_embed(&img);
        assert_eq!(e[0], 0.5);
        assert_eq!(e[63], 0.5);
        assert!(e[1..63].iter().all(|&v| v == 0.0));
        // thumbnail samples source (32i + 16, 32j + 16): even parity, so value 0
        for j in 0..8u32 {
            for i in 0..8u32 {
                let sx = ((i as f64 + 0.5) * 32.0 - 0.5 + 0.5).floor() as u32;
                let sy = ((j as f64 + 0.5) * 32.0 - 0.5 + 0.5).floor() as u32;
                let expected = img.get(sx, sy) as f64 / 255.0;
                assert_eq!(e[64 + (j * 8 + i) as usize], expected);
            }
        }
        assert!(e[64..].iter().all(|&v| v == 0.0));
    }
}
