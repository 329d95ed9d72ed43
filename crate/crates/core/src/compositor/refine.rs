use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{AnomalyMask, MASK_ANOMALY, MASK_BACKGROUND, MASK_IGNORE};

/// Upper bound on repetitions of the morphological stage.
pub const MAX_REFINE_PASSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Median window is `2r + 1` square.
    pub median_radius: usize,
    /// Side of the square structuring element; even sizes are rounded up.
    pub open_close_kernel: usize,
    pub keep_largest_component: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { median_radius: 2, open_close_kernel: 3, keep_largest_component: false }
    }
}

/// Window counts over the binary plane, answered from summed-area tables.
struct Plane {
    w: usize,
    h: usize,
    ones: Vec<u32>,
    valid: Vec<u32>,
}

impl Plane {
    fn new(v: &[u8], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut ones = vec![0u32; stride * (h + 1)];
        let mut valid = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let (mut ro, mut rv) = (0u32, 0u32);
            for x in 0..w {
                let p = v[y * w + x];
                ro += (p == MASK_ANOMALY) as u32;
                rv += (p != MASK_IGNORE) as u32;
                let i = (y + 1) * stride + x + 1;
                ones[i] = ones[i - stride] + ro;
                valid[i] = valid[i - stride] + rv;
            }
        }
        Self { w, h, ones, valid }
    }

    /// `(ones, valid)` in the clipped square of radius `r` around `(x, y)`.
    fn window(&self, x: usize, y: usize, r: usize) -> (u32, u32) {
        let stride = self.w + 1;
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(self.w), (y + r + 1).min(self.h));
        let sum = |t: &[u32]| t[y1 * stride + x1] + t[y0 * stride + x0] - t[y0 * stride + x1] - t[y1 * stride + x0];
        (sum(&self.ones), sum(&self.valid))
    }
}

#[derive(Clone, Copy)]
enum Op {
    Median,
    Erode,
    Dilate,
}

fn apply(v: &[u8], w: usize, h: usize, r: usize, op: Op) -> Vec<u8> {
    if r == 0 {
        return v.to_vec();
    }
    let plane = Plane::new(v, w, h);
    let mut out = v.to_vec();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if v[i] == MASK_IGNORE {
                continue;
            }
            let (ones, valid) = plane.window(x, y, r);
            let on = match op {
                Op::Median => 2 * ones > valid,
                Op::Erode => ones == valid,
                Op::Dilate => ones > 0,
            };
            out[i] = if on { MASK_ANOMALY } else { MASK_BACKGROUND };
        }
    }
    out
}

fn keep_largest(v: &mut [u8], w: usize, h: usize) {
    let mut label = vec![u32::MAX; v.len()];
    let mut best = (0usize, u32::MAX);
    let mut queue = VecDeque::new();
    let mut next = 0u32;
    for start in 0..v.len() {
        if v[start] != MASK_ANOMALY || label[start] != u32::MAX {
            continue;
        }
        let mut size = 0;
        label[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if v[j] == MASK_ANOMALY && label[j] == u32::MAX {
                    label[j] = next;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if size > best.0 {
            best = (size, next);
        }
        next += 1;
    }
    for (p, &l) in v.iter_mut().zip(&label) {
        if *p == MASK_ANOMALY && l != best.1 {
            *p = MASK_BACKGROUND;
        }
    }
}

/// Opening, closing and optional component pruning.
fn morph(v: &[u8], w: usize, h: usize, cfg: &RefineConfig) -> Vec<u8> {
    let k = cfg.open_close_kernel / 2;
    let mut out = apply(v, w, h, k, Op::Erode);
    out = apply(&out, w, h, k, Op::Dilate);
    out = apply(&out, w, h, k, Op::Dilate);
    out = apply(&out, w, h, k, Op::Erode);
    if cfg.keep_largest_component {
        keep_largest(&mut out, w, h);
    }
    out
}

/// Median filter, then opening, then closing with a square element, then
/// optional largest-component pruning, all on the anomaly/background plane.
/// Ignore pixels are excluded from every window and copied through.
///
/// A mask the morphological stage already leaves unchanged is returned as
/// is; otherwise that stage is repeated after the median until it settles.
/// Either way the output is such a mask, so refinement is idempotent.
pub fn refine_mask(mask: &AnomalyMask, cfg: &RefineConfig) -> AnomalyMask {
    let (w, h) = (mask.width(), mask.height());
    let input = mask.values();
    let Some((x0, y0, x1, y1)) = support(input, w) else {
        return mask.clone();
    };
    // Pixels this far from every non-background pixel stay background.
    let m = 2 * (cfg.median_radius + cfg.open_close_kernel) + 2;
    let (cx0, cy0, cx1, cy1) = (x0.saturating_sub(m), y0.saturating_sub(m), (x1 + m).min(w - 1), (y1 + m).min(h - 1));
    let (cw, ch) = (cx1 - cx0 + 1, cy1 - cy0 + 1);
    let crop: Vec<u8> = (cy0..=cy1).flat_map(|y| input[y * w + cx0..=y * w + cx1].iter().copied()).collect();
    let Some(out) = refine_plane(&crop, cw, ch, cfg) else {
        return mask.clone();
    };
    let mut full = input.to_vec();
    for (row, y) in out.chunks_exact(cw).zip(cy0..) {
        full[y * w + cx0..=y * w + cx1].copy_from_slice(row);
    }
    AnomalyMask::new(w, h, full).expect("filters emit sentinel values only")
}

/// Bounding box of pixels that are not background.
fn support(v: &[u8], w: usize) -> Option<(usize, usize, usize, usize)> {
    let mut b: Option<(usize, usize, usize, usize)> = None;
    for (y, row) in v.chunks_exact(w).enumerate() {
        let (Some(first), Some(last)) = (row.iter().position(|&p| p != MASK_BACKGROUND), row.iter().rposition(|&p| p != MASK_BACKGROUND))
        else {
            continue;
        };
        b = Some(match b {
            None => (first, y, last, y),
            Some((x0, y0, x1, _)) => (x0.min(first), y0, x1.max(last), y),
        });
    }
    b
}

/// Refinement of a whole plane; `None` when it is already stable.
fn refine_plane(input: &[u8], w: usize, h: usize, cfg: &RefineConfig) -> Option<Vec<u8>> {
    if morph(input, w, h, cfg) == input {
        return None;
    }
    let mut cur = morph(&apply(input, w, h, cfg.median_radius, Op::Median), w, h, cfg);
    for _ in 0..MAX_REFINE_PASSES {
        let next = morph(&cur, w, h, cfg);
        if next == cur {
            break;
        }
        cur = next;
    }
    Some(cur)
}
