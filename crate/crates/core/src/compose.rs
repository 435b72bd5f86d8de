//! Tumour/liver intersection and the three-level conditioning image.

use thiserror::Error;

use crate::edge_detect::EdgeMap;
use crate::imaging::{BinaryMask, GrayImage};

pub const BACKGROUND: u8 = 0;
pub const TUMOR: u8 = 128;
pub const EDGE: u8 = 255;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComposeError {
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("tumor mask is empty after intersection")]
    EmptyTumor,
    #[error("pixel value {0} is not one of 0, 128, 255")]
    InvalidLevel(u8),
}

/// Pixel-wise AND.
pub fn intersect(tumor: &BinaryMask, liver: &BinaryMask) -> Result<BinaryMask, ComposeError> {
    if tumor.dims() != liver.dims() {
        return Err(ComposeError::DimensionMismatch(tumor.dims(), liver.dims()));
    }
    let data = tumor
        .data()
        .iter()
        .zip(liver.data())
        .map(|(&a, &b)| a && b)
        .collect();
    Ok(BinaryMask::new(tumor.width(), tumor.height(), data).expect("same dimensions"))
}

/// Generator input: background 0, edges 255, tumour 128 (tumour wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditioningImage {
    image: GrayImage,
}

impl ConditioningImage {
    /// Wraps a raster, checking the `{0, 128, 255}` alphabet.
    pub fn from_image(image: GrayImage) -> Result<Self, ComposeError> {
        if let Some(&bad) = image
            .data()
            .iter()
            .find(|&&v| !matches!(v, BACKGROUND | TUMOR | EDGE))
        {
            return Err(ComposeError::InvalidLevel(bad));
        }
        Ok(Self { image })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn into_image(self) -> GrayImage {
        self.image
    }

    pub fn dims(&self) -> (u32, u32) {
        self.image.dims()
    }

    /// Pixels equal to [`TUMOR`].
    pub fn tumor_mask(&self) -> BinaryMask {
        self.level_mask(TUMOR)
    }

    /// Pixels equal to [`EDGE`].
    pub fn edge_mask(&self) -> BinaryMask {
        self.level_mask(EDGE)
    }

    fn level_mask(&self, level: u8) -> BinaryMask {
        let data = self.image.data().iter().map(|&v| v == level).collect();
        BinaryMask::new(self.image.width(), self.image.height(), data).expect("same dimensions")
    }
}

pub fn overlay(
    intersection: &BinaryMask,
    edges: &EdgeMap,
) -> Result<ConditioningImage, ComposeError> {
    if intersection.dims() != edges.dims() {
        return Err(ComposeError::DimensionMismatch(intersection.dims(), edges.dims()));
    }
    if intersection.is_empty() {
        return Err(ComposeError::EmptyTumor);
    }
    let data = intersection
        .data()
        .iter()
        .zip(edges.data())
        .map(|(&tumor, &edge)| match (tumor, edge) {
            (true, _) => TUMOR,
            (false, true) => EDGE,
            (false, false) => BACKGROUND,
        })
        .collect();
    let image = GrayImage::new(intersection.width(), intersection.height(), data)
        .expect("same dimensions");
    Ok(ConditioningImage { image })
}
