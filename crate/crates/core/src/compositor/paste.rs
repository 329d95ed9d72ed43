use super::{harmonize, AnomalyMask, CompositorError, ObjectCutout, SceneImage, MASK_ANOMALY};
use crate::placer::{PixelRect, PseudoBox};
use crate::scalar::Real;

/// Resampled alpha at or above this value counts as object.
pub const ALPHA_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasteResult {
    pub image: SceneImage,
    pub mask: AnomalyMask,
}

/// Bilinear resize of an RGBA cutout with pixel-center alignment.
///
/// Color is interpolated premultiplied by alpha so that transparent texels
/// do not bleed into the object edge.
pub fn resample_bilinear(cutout: &ObjectCutout, w: usize, h: usize) -> Vec<u8> {
    let (sw, sh) = (cutout.width(), cutout.height());
    let src = cutout.rgba();
    if (sw, sh) == (w, h) {
        return src.to_vec();
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f32)> {
        (0..n_out)
            .map(|i| {
                let s = ((i as f32 + 0.5) * n_in as f32 / n_out as f32 - 0.5).clamp(0.0, (n_in - 1) as f32);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f32)
            })
            .collect()
    };
    let xs = axis(w, sw);
    let ys = axis(h, sh);
    let mut out = vec![0u8; 4 * w * h];
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            let taps = [
                (y0 * sw + x0, (1.0 - fx) * (1.0 - fy)),
                (y0 * sw + x1, fx * (1.0 - fy)),
                (y1 * sw + x0, (1.0 - fx) * fy),
                (y1 * sw + x1, fx * fy),
            ];
            let mut acc = [0f32; 4];
            for (idx, wt) in taps {
                let p = &src[4 * idx..4 * idx + 4];
                let a = p[3] as f32 * wt;
                acc[0] += p[0] as f32 * a;
                acc[1] += p[1] as f32 * a;
                acc[2] += p[2] as f32 * a;
                acc[3] += a;
            }
            let o = &mut out[4 * (oy * w + ox)..4 * (oy * w + ox) + 4];
            if acc[3] > 0.0 {
                for c in 0..3 {
                    o[c] = (acc[c] / acc[3]).round().clamp(0.0, 255.0) as u8;
                }
            }
            o[3] = acc[3].round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn checked_rect<T: Real>(scene: &SceneImage, bx: &PseudoBox<T>) -> Result<PixelRect, CompositorError> {
    let rect = bx.pixel_rect();
    if !rect.inside(scene.width(), scene.height()) {
        return Err(CompositorError::BoxOutOfBounds { rect, width: scene.width(), height: scene.height() });
    }
    Ok(rect)
}

/// Pastes `cutout` into the pixel footprint of `bx`.
///
/// Only texels whose resampled alpha reaches [`ALPHA_THRESHOLD`] are
/// blended and marked in the mask; every other pixel keeps its input value.
pub fn paste_object<T: Real>(
    scene: &SceneImage,
    cutout: &ObjectCutout,
    bx: &PseudoBox<T>,
    harmonize_colors: bool,
) -> Result<PasteResult, CompositorError> {
    let rect = checked_rect(scene, bx)?;
    let harmonized;
    let cutout = if harmonize_colors {
        harmonized = harmonize(cutout, scene, bx)?;
        &harmonized
    } else {
        cutout
    };
    let patch = resample_bilinear(cutout, rect.w, rect.h);
    let mut image = scene.clone();
    let mut mask = AnomalyMask::zeros(scene.width(), scene.height());
    let (x0, y0) = (rect.x0 as usize, rect.y0 as usize);
    for py in 0..rect.h {
        for px in 0..rect.w {
            let t = &patch[4 * (py * rect.w + px)..4 * (py * rect.w + px) + 4];
            let a = t[3] as u32;
            if t[3] < ALPHA_THRESHOLD {
                continue;
            }
            let (x, y) = (x0 + px, y0 + py);
            let s = image.pixel(x, y);
            let mut o = [0u8; 3];
            for c in 0..3 {
                o[c] = ((a * t[c] as u32 + (255 - a) * s[c] as u32 + 127) / 255) as u8;
            }
            image.set_pixel(x, y, o);
            mask.set(x, y, MASK_ANOMALY);
        }
    }
    Ok(PasteResult { image, mask })
}
