use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Axis-aligned box given by its center and size, in pixels, with rows
/// counted from the top of the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoBox<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

/// Integer pixel rectangle `[x0, x0 + w) × [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn x1(&self) -> i64 {
        self.x0 + self.w as i64
    }

    pub fn y1(&self) -> i64 {
        self.y0 + self.h as i64
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1() <= width as i64 && self.y1() <= height as i64 && self.w > 0 && self.h > 0
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    /// Grows the rectangle by `r` on every side and clips to the image.
    pub fn dilate(&self, r: usize, width: usize, height: usize) -> PixelRect {
        let x0 = (self.x0 - r as i64).max(0);
        let y0 = (self.y0 - r as i64).max(0);
        let x1 = (self.x1() + r as i64).min(width as i64);
        let y1 = (self.y1() + r as i64).min(height as i64);
        PixelRect { x0, y0, w: (x1 - x0).max(0) as usize, h: (y1 - y0).max(0) as usize }
    }
}

impl<T: Real> PseudoBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Self {
        Self { cx, cy, w, h }
    }

    /// Builds a box from its top-left corner and size.
    pub fn from_corner(x0: T, y0: T, w: T, h: T) -> Self {
        Self { cx: x0 + w * T::half(), cy: y0 + h * T::half(), w, h }
    }

    pub fn left(&self) -> T {
        self.cx - self.w * T::half()
    }

    pub fn right(&self) -> T {
        self.cx + self.w * T::half()
    }

    pub fn top(&self) -> T {
        self.cy - self.h * T::half()
    }

    /// Bottom edge `cy + h/2`.
    pub fn bottom(&self) -> T {
        self.cy + self.h * T::half()
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    /// Last pixel row covered by the box; this is the ground-contact row.
    pub fn anchor_row(&self) -> i64 {
        self.bottom().ceil().to_i64().unwrap_or(i64::MIN) - 1
    }

    /// Pixel holding the middle of the bottom edge.
    pub fn bottom_center_pixel(&self) -> (i64, i64) {
        (self.cx.floor().to_i64().unwrap_or(i64::MIN), self.anchor_row())
    }

    /// Rounded pixel footprint; exact when corners and sizes are integral.
    pub fn pixel_rect(&self) -> PixelRect {
        let w = self.w.round().to_i64().unwrap_or(0).max(1) as usize;
        let h = self.h.round().to_i64().unwrap_or(0).max(1) as usize;
        PixelRect {
            x0: self.left().round().to_i64().unwrap_or(i64::MIN / 4),
            y0: self.top().round().to_i64().unwrap_or(i64::MIN / 4),
            w,
            h,
        }
    }

    pub fn is_valid_in(&self, image_w: usize, image_h: usize) -> bool {
        let zero = T::zero();
        self.w > zero
            && self.h > zero
            && self.left() >= zero
            && self.top() >= zero
            && self.right() <= T::of(image_w as f64)
            && self.bottom() <= T::of(image_h as f64)
            && (0..image_h as i64).contains(&self.anchor_row())
    }

    /// Center coordinates divided by the image size.
    pub fn normalized_center(&self, image_w: T, image_h: T) -> (T, T) {
        (self.cx / image_w, self.cy / image_h)
    }

    pub fn cast<U: Real>(&self) -> PseudoBox<U> {
        let c = |v: T| U::of(v.to_f64().unwrap());
        PseudoBox { cx: c(self.cx), cy: c(self.cy), w: c(self.w), h: c(self.h) }
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou<T: Real>(a: &PseudoBox<T>, b: &PseudoBox<T>) -> T {
    let zero = T::zero();
    let ix = (a.right().min(b.right()) - a.left().max(b.left())).max(zero);
    let iy = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(zero);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= zero {
        return zero;
    }
    (inter / union).min(T::one()).max(zero)
}

/// L1 distance between normalized centers plus `1 - IoU`.
pub fn match_cost<T: Real>(pred: &PseudoBox<T>, pseudo: &PseudoBox<T>, image_w: T, image_h: T) -> T {
    let (px, py) = pred.normalized_center(image_w, image_h);
    let (qx, qy) = pseudo.normalized_center(image_w, image_h);
    (px - qx).abs() + (py - qy).abs() + (T::one() - iou(pred, pseudo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Counts covered unit cells on a fine raster.
    fn raster_iou(a: &PseudoBox<f64>, b: &PseudoBox<f64>, scale: f64) -> f64 {
        let cover = |bx: &PseudoBox<f64>, x: f64, y: f64| x >= bx.left() && x < bx.right() && y >= bx.top() && y < bx.bottom();
        let (mut inter, mut uni) = (0usize, 0usize);
        let lo = a.left().min(b.left());
        let hi = a.right().max(b.right());
        let top = a.top().min(b.top());
        let bot = a.bottom().max(b.bottom());
        let nx = ((hi - lo) * scale).ceil() as usize;
        let ny = ((bot - top) * scale).ceil() as usize;
        for j in 0..ny {
            for i in 0..nx {
                let x = lo + (i as f64 + 0.5) / scale;
                let y = top + (j as f64 + 0.5) / scale;
                let (ca, cb) = (cover(a, x, y), cover(b, x, y));
                inter += (ca && cb) as usize;
                uni += (ca || cb) as usize;
            }
        }
        inter as f64 / uni as f64
    }

    #[test]
    fn iou_examples() {
        let a = PseudoBox::new(10.0, 10.0, 10.0, 10.0);
        let b = PseudoBox::new(15.0, 10.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &PseudoBox::new(40.0, 40.0, 5.0, 5.0)), 0.0);
        assert_relative_eq!(iou(&a, &b), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(raster_iou(&a, &b, 4.0), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn match_cost_examples() {
        let a = PseudoBox::new(10.0, 10.0, 10.0, 10.0);
        let b = PseudoBox::new(15.0, 10.0, 10.0, 10.0);
        assert_eq!(match_cost(&a, &a, 50.0, 50.0), 0.0);
        assert_relative_eq!(match_cost(&a, &b, 50.0, 50.0), 0.1 + 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(match_cost(&a, &b, 50.0, 50.0), match_cost(&b, &a, 50.0, 50.0));
    }

    #[test]
    fn f32_geometry_agrees_with_f64() {
        let a = PseudoBox::new(10.0f32, 10.0, 10.0, 10.0);
        let b = PseudoBox::new(15.0f32, 10.0, 10.0, 10.0);
        assert!((iou(&a, &b) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn anchor_and_footprint() {
        let b = PseudoBox::from_corner(3.0, 4.0, 5.0, 6.0);
        assert_eq!(b.anchor_row(), 9);
        assert_eq!(b.bottom_center_pixel(), (5, 9));
        assert_eq!(b.pixel_rect(), PixelRect { x0: 3, y0: 4, w: 5, h: 6 });
        assert!(b.is_valid_in(8, 10));
        assert!(!b.is_valid_in(8, 9));
        let r = b.pixel_rect().dilate(8, 20, 12);
        assert_eq!(r, PixelRect { x0: 0, y0: 0, w: 16, h: 12 });
    }

    fn arb_box() -> impl Strategy<Value = PseudoBox<f64>> {
        (0u32..40, 0u32..40, 1u32..30, 1u32..30)
            .prop_map(|(x, y, w, h)| PseudoBox::from_corner(x as f64, y as f64, w as f64, h as f64))
    }

    proptest! {
        #[test]
        fn iou_matches_raster_and_is_symmetric(a in arb_box(), b in arb_box()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
            prop_assert!((v - raster_iou(&a, &b, 1.0)).abs() < 1e-12);
        }
    }
}
