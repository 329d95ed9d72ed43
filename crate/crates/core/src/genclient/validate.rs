use super::{GenError, GenResult, InpaintRequest};
use crate::compositor::{refine_mask, AnomalyMask, RefineConfig, SceneImage, MASK_ANOMALY};
use crate::placer::PixelRect;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    /// Edits may extend this many pixels beyond the box.
    pub dilation: usize,
    /// Per-channel change above which a pixel counts as edited when a
    /// mask has to be derived from the images.
    pub diff_threshold: u8,
    /// Per-channel change tolerated outside the allowed region.
    pub leak_tolerance: u8,
    pub refine: RefineConfig,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { dilation: 8, diff_threshold: 12, leak_tolerance: 0, refine: RefineConfig::default() }
    }
}

fn dims_match(expected: (usize, usize), got: (usize, usize)) -> Result<(), GenError> {
    if expected != got {
        return Err(GenError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_mask_dims(r: &GenResult) -> Result<(), GenError> {
    if let Some(m) = &r.mask {
        dims_match((r.image.width(), r.image.height()), (m.width(), m.height()))?;
    }
    Ok(())
}

pub fn check_scene_reply(w: usize, h: usize, reply: GenResult) -> Result<GenResult, GenError> {
    dims_match((w, h), (reply.image.width(), reply.image.height()))?;
    check_mask_dims(&reply)?;
    Ok(reply)
}

/// Marks pixels where any channel moved by more than `threshold`.
pub fn difference_mask(before: &SceneImage, after: &SceneImage, threshold: u8) -> AnomalyMask {
    let v = before
        .rgb()
        .chunks_exact(3)
        .zip(after.rgb().chunks_exact(3))
        .map(|(a, b)| if a.iter().zip(b).any(|(x, y)| x.abs_diff(*y) > threshold) { MASK_ANOMALY } else { 0 })
        .collect();
    AnomalyMask::new(before.width(), before.height(), v).expect("binary values")
}

fn first_outside(w: usize, allowed: &PixelRect, n: usize, mut hit: impl FnMut(usize) -> bool) -> Option<(usize, (usize, usize))> {
    let mut count = 0;
    let mut first = None;
    for i in 0..n {
        let (x, y) = (i % w, i / w);
        if !allowed.contains(x as i64, y as i64) && hit(i) {
            count += 1;
            first.get_or_insert((x, y));
        }
    }
    first.map(|f| (count, f))
}

/// Rejects replies that resize the image or edit outside the dilated box
/// and fills in a mask when the backend sent none.
pub fn check_inpaint_reply(req: &InpaintRequest, reply: GenResult, cfg: &ValidationConfig) -> Result<GenResult, GenError> {
    let (w, h) = (req.image.width(), req.image.height());
    dims_match((w, h), (reply.image.width(), reply.image.height()))?;
    check_mask_dims(&reply)?;
    let allowed = req.bbox.pixel_rect().dilate(cfg.dilation, w, h);
    let (before, after) = (req.image.rgb(), reply.image.rgb());
    let changed = |i: usize| (0..3).any(|c| before[3 * i + c].abs_diff(after[3 * i + c]) > cfg.leak_tolerance);
    if let Some((count, first)) = first_outside(w, &allowed, w * h, changed) {
        return Err(GenError::EditLeakage { count, first });
    }
    let mask = match reply.mask {
        Some(m) => {
            let vals = m.values();
            if let Some((count, first)) = first_outside(w, &allowed, w * h, |i| vals[i] == MASK_ANOMALY) {
                return Err(GenError::EditLeakage { count, first });
            }
            m
        }
        None => refine_mask(&difference_mask(&req.image, &reply.image, cfg.diff_threshold), &cfg.refine),
    };
    Ok(GenResult { mask: Some(mask), ..reply })
}
