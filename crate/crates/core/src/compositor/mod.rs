//! Copy-paste anomaly insertion, anomaly masks and mask refinement.

mod bank;
mod harmonize;
mod image;
mod paste;
mod refine;

use thiserror::Error;

pub use self::image::{pixel_fraction, AnomalyMask, ObjectCutout, SceneImage, MASK_ANOMALY, MASK_BACKGROUND, MASK_IGNORE};
pub use bank::{procedural_cutout, CutoutBank, BUILTIN_CONCEPTS};
pub use harmonize::{harmonize, ring_rect};
pub use paste::{paste_object, resample_bilinear, PasteResult, ALPHA_THRESHOLD};
pub use refine::{refine_mask, RefineConfig, MAX_REFINE_PASSES};

#[derive(Debug, Error)]
pub enum CompositorError {
    #[error("buffer holds {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("cutout alpha channel is empty")]
    EmptyAlpha,
    #[error("mask value {0} is not one of 0, 128, 255")]
    IllegalMaskValue(u8),
    #[error("mask holds only ignore pixels")]
    AllIgnore,
    #[error("box {rect:?} does not fit a {width}x{height} image")]
    BoxOutOfBounds { rect: crate::placer::PixelRect, width: usize, height: usize },
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("no cutouts for concept {0:?}")]
    UnknownConcept(String),
    #[error("image format: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}
