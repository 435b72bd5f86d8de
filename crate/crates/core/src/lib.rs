//! Deterministic synthesis of tumour-conditioning images for multiparametric
//! liver MRI, plus Frechet Inception Distance evaluation.
//!
//! Stage 1 of the pipeline, per synthetic case:
//!
//! 1. sample a geometric transform of the patient's tumour mask whose
//!    centroid lands in a liver-plausible region ([`mask_transform`]);
//! 2. extract Canny edges from the patient's MR image with randomly drawn
//!    hysteresis thresholds ([`edge_detect`]);
//! 3. intersect the transformed tumour with the liver mask and paint it over
//!    the edges ([`compose`]).
//!
//! [`orchestrator`] drives this over a generation plan ([`manifest`]) in
//! parallel with per-case seeds, and [`fid`] scores synthetic image sets
//! against real ones.

mod exec;

pub mod compose;
pub mod edge_detect;
pub mod fid;
pub mod imaging;
pub mod manifest;
pub mod mask_transform;
pub mod orchestrator;
pub mod toy;

pub use compose::{intersect, overlay, ConditioningImage};
pub use edge_detect::{canny, sample_thresholds, EdgeMap, ThresholdPair};
pub use fid::{fid, fit_gaussian, sqrtm_trace, EmbeddingSet, GaussianFit};
pub use imaging::{BinaryMask, GrayImage, ResizeMode};
pub use mask_transform::{
    apply_transform, centroid, sample_constrained, AnatomicalRegion, TransformRanges,
    TransformSpec,
};
