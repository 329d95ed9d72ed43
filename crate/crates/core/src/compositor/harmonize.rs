use super::{CompositorError, ObjectCutout, SceneImage, ALPHA_THRESHOLD};
use crate::placer::{PixelRect, PseudoBox};
use crate::scalar::Real;

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: [f64; 3],
    sq: [f64; 3],
}

impl Moments {
    fn add(&mut self, p: &[u8]) {
        self.n += 1.0;
        for c in 0..3 {
            let v = p[c] as f64;
            self.sum[c] += v;
            self.sq[c] += v * v;
        }
    }

    fn mean_std(&self) -> ([f64; 3], [f64; 3]) {
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for c in 0..3 {
            mean[c] = self.sum[c] / self.n;
            std[c] = (self.sq[c] / self.n - mean[c] * mean[c]).max(0.0).sqrt();
        }
        (mean, std)
    }
}

/// Context ring around `rect`, `max(4, h/8)` pixels wide, clipped to the
/// image. The box interior is excluded by the caller.
pub fn ring_rect(rect: &PixelRect, width: usize, height: usize) -> PixelRect {
    rect.dilate((rect.h / 8).max(4), width, height)
}

fn background_moments(scene: &SceneImage, rect: &PixelRect) -> Moments {
    let outer = ring_rect(rect, scene.width(), scene.height());
    let mut m = Moments::default();
    for y in outer.y0..outer.y1() {
        for x in outer.x0..outer.x1() {
            if !rect.contains(x, y) {
                let (xu, yu) = (x as usize, y as usize);
                m.add(&scene.pixel(xu, yu));
            }
        }
    }
    if m.n == 0.0 {
        m = Moments::default();
        for p in scene.rgb().chunks_exact(3) {
            m.add(p);
        }
    }
    m
}

/// Per-channel mean/std color transfer of the cutout onto the statistics
/// of the scene around `bx`. Alpha is left untouched.
pub fn harmonize<T: Real>(cutout: &ObjectCutout, scene: &SceneImage, bx: &PseudoBox<T>) -> Result<ObjectCutout, CompositorError> {
    let rect = bx.pixel_rect();
    if !rect.inside(scene.width(), scene.height()) {
        return Err(CompositorError::BoxOutOfBounds { rect, width: scene.width(), height: scene.height() });
    }
    let mut fg = Moments::default();
    for p in cutout.rgba().chunks_exact(4).filter(|p| p[3] >= ALPHA_THRESHOLD) {
        fg.add(p);
    }
    if fg.n == 0.0 {
        return Ok(cutout.clone());
    }
    let (fm, fs) = fg.mean_std();
    let (bm, bs) = background_moments(scene, &rect).mean_std();
    let mut scale = [1.0; 3];
    for c in 0..3 {
        if fs[c] > 0.0 {
            scale[c] = bs[c] / fs[c];
        }
    }
    let mut out = cutout.clone();
    for p in out.rgba_mut().chunks_exact_mut(4) {
        for c in 0..3 {
            p[c] = ((p[c] as f64 - fm[c]) * scale[c] + bm[c]).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel_mean(c: &ObjectCutout, ch: usize) -> f64 {
        let px: Vec<_> = c.rgba().chunks_exact(4).filter(|p| p[3] >= 128).collect();
        px.iter().map(|p| p[ch] as f64).sum::<f64>() / px.len() as f64
    }

    fn striped(w: usize, h: usize, lo: u8, hi: u8) -> Vec<u8> {
        (0..w * h).flat_map(|i| {
            let v = if (i % w) % 2 == 0 { lo } else { hi };
            [v, v, v]
        })
        .collect()
    }

    #[test]
    fn mean_shift_with_equal_std() {
        let scene = SceneImage::new(40, 40, striped(40, 40, 90, 110)).unwrap();
        let rgba: Vec<u8> = striped(8, 8, 40, 60).chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect();
        let cut = ObjectCutout::new(8, 8, rgba, "x").unwrap();
        let out = harmonize(&cut, &scene, &PseudoBox::from_corner(16.0, 16.0, 8.0, 8.0)).unwrap();
        for ch in 0..3 {
            assert!((channel_mean(&out, ch) - 100.0).abs() <= 1.0);
        }
    }

    #[test]
    fn matching_stats_is_identity() {
        let scene = SceneImage::new(40, 40, striped(40, 40, 90, 110)).unwrap();
        let rgba: Vec<u8> = striped(8, 8, 90, 110).chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect();
        let cut = ObjectCutout::new(8, 8, rgba, "x").unwrap();
        let out = harmonize(&cut, &scene, &PseudoBox::from_corner(16.0, 16.0, 8.0, 8.0)).unwrap();
        for (a, b) in out.rgba().iter().zip(cut.rgba()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn flat_cutout_only_shifts() {
        let scene = SceneImage::new(30, 30, striped(30, 30, 100, 140)).unwrap();
        let mut rgba = [70, 70, 70, 255].repeat(25);
        rgba[3] = 0;
        let cut = ObjectCutout::new(5, 5, rgba, "x").unwrap();
        let out = harmonize(&cut, &scene, &PseudoBox::from_corner(10.0, 10.0, 5.0, 5.0)).unwrap();
        let mut ring = vec![];
        for y in 6..19 {
            for x in 6..19 {
                if !((10..15).contains(&x) && (10..15).contains(&y)) {
                    ring.push(scene.pixel(x, y)[0] as f64);
                }
            }
        }
        let mean = (ring.iter().sum::<f64>() / ring.len() as f64).round() as u8;
        assert!(out.rgba().chunks_exact(4).all(|p| p[0] == mean));
        assert_eq!(out.alpha().collect::<Vec<_>>(), cut.alpha().collect::<Vec<_>>());
    }

    #[test]
    fn full_image_box_uses_whole_image() {
        let scene = SceneImage::filled(6, 6, [10, 20, 30]);
        let cut = ObjectCutout::new(1, 1, vec![200, 200, 200, 255], "x").unwrap();
        let out = harmonize(&cut, &scene, &PseudoBox::from_corner(0.0, 0.0, 6.0, 6.0)).unwrap();
        assert_eq!(out.rgba(), &[10, 20, 30, 255]);
    }
}
