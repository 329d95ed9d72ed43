use std::path::Path;

use image::DynamicImage;

use super::CompositorError;
use crate::imageio;

pub const MASK_BACKGROUND: u8 = 0;
pub const MASK_IGNORE: u8 = 128;
pub const MASK_ANOMALY: u8 = 255;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CompositorError {
    CompositorError::Io(format!("{}: {e}", path.display()))
}

/// 8-bit RGB scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneImage {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl SceneImage {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self, CompositorError> {
        if rgb.len() != 3 * width * height {
            return Err(CompositorError::BufferSize { expected: 3 * width * height, got: rgb.len() });
        }
        Ok(Self { width, height, rgb })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width, height, rgb: color.iter().copied().cycle().take(3 * width * height).collect() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn rgb_mut(&mut self) -> &mut [u8] {
        &mut self.rgb
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, p: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.rgb[i..i + 3].copy_from_slice(&p);
    }

    pub fn from_dynamic(img: DynamicImage) -> Self {
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self { width: w as usize, height: h as usize, rgb: rgb.into_raw() }
    }

    pub fn load(path: &Path) -> Result<Self, CompositorError> {
        let img = imageio::read(path).map_err(|e| io_err(path, e))?;
        if !matches!(img, DynamicImage::ImageRgb8(_)) {
            return Err(CompositorError::Format(format!("{}: expected 8-bit RGB, got {:?}", path.display(), img.color())));
        }
        Ok(Self::from_dynamic(img))
    }

    pub fn save(&self, path: &Path) -> Result<(), CompositorError> {
        imageio::write_rgb8(path, self.width, self.height, &self.rgb).map_err(|e| io_err(path, e))
    }

    pub fn to_png(&self) -> Vec<u8> {
        imageio::encode_png(self.width, self.height, &self.rgb, image::ExtendedColorType::Rgb8).expect("in-memory PNG encode")
    }
}

/// 8-bit RGBA object whose alpha channel is the object mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectCutout {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    pub category: String,
}

impl ObjectCutout {
    pub fn new(width: usize, height: usize, rgba: Vec<u8>, category: impl Into<String>) -> Result<Self, CompositorError> {
        if rgba.len() != 4 * width * height || width == 0 || height == 0 {
            return Err(CompositorError::BufferSize { expected: 4 * width * height, got: rgba.len() });
        }
        if !rgba.chunks_exact(4).any(|p| p[3] > 0) {
            return Err(CompositorError::EmptyAlpha);
        }
        Ok(Self { width, height, rgba, category: category.into() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rgba(&self) -> &[u8] {
        &self.rgba
    }

    pub fn alpha(&self) -> impl Iterator<Item = u8> + '_ {
        self.rgba.chunks_exact(4).map(|p| p[3])
    }

    pub(crate) fn rgba_mut(&mut self) -> &mut [u8] {
        &mut self.rgba
    }

    pub fn load(path: &Path, category: impl Into<String>) -> Result<Self, CompositorError> {
        let img = imageio::read(path).map_err(|e| io_err(path, e))?.to_rgba8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw(), category)
    }

    pub fn save(&self, path: &Path) -> Result<(), CompositorError> {
        imageio::write_rgba8(path, self.width, self.height, &self.rgba).map_err(|e| io_err(path, e))
    }
}

/// Per-pixel ground truth: 0 in-distribution, 255 anomaly, 128 ignore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl AnomalyMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, CompositorError> {
        if values.len() != width * height {
            return Err(CompositorError::BufferSize { expected: width * height, got: values.len() });
        }
        if let Some(&v) = values.iter().find(|&&v| !matches!(v, MASK_BACKGROUND | MASK_IGNORE | MASK_ANOMALY)) {
            return Err(CompositorError::IllegalMaskValue(v));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![MASK_BACKGROUND; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub(crate) fn set(&mut self, x: usize, y: usize, v: u8) {
        self.values[y * self.width + x] = v;
    }

    pub fn anomaly_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == MASK_ANOMALY).count()
    }

    /// Marks every anomaly pixel of `other` as anomalous here.
    pub fn union_with(&mut self, other: &AnomalyMask) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            if b == MASK_ANOMALY {
                *a = MASK_ANOMALY;
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self, CompositorError> {
        let img = imageio::read(path).map_err(|e| io_err(path, e))?;
        let DynamicImage::ImageLuma8(gray) = img else {
            return Err(CompositorError::Format(format!("{}: mask must be 8-bit grayscale", path.display())));
        };
        let (w, h) = gray.dimensions();
        Self::new(w as usize, h as usize, gray.into_raw())
    }

    pub fn save(&self, path: &Path) -> Result<(), CompositorError> {
        imageio::write_gray8(path, self.width, self.height, &self.values).map_err(|e| io_err(path, e))
    }

    pub fn to_png(&self) -> Vec<u8> {
        imageio::encode_png(self.width, self.height, &self.values, image::ExtendedColorType::L8).expect("in-memory PNG encode")
    }
}

/// `count(255) / count(non-ignore)`.
pub fn pixel_fraction(mask: &AnomalyMask) -> Result<f64, CompositorError> {
    let valid = mask.values.iter().filter(|&&v| v != MASK_IGNORE).count();
    if valid == 0 {
        return Err(CompositorError::AllIgnore);
    }
    Ok(mask.anomaly_count() as f64 / valid as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_examples() {
        let all = AnomalyMask::new(2, 2, vec![255; 4]).unwrap();
        assert_eq!(pixel_fraction(&all).unwrap(), 1.0);
        let mut v = vec![0u8; 100];
        v[..5].fill(255);
        assert_eq!(pixel_fraction(&AnomalyMask::new(10, 10, v).unwrap()).unwrap(), 0.05);
        let ign = AnomalyMask::new(3, 1, vec![128, 255, 0]).unwrap();
        assert_eq!(pixel_fraction(&ign).unwrap(), 0.5);
        assert!(matches!(pixel_fraction(&AnomalyMask::new(1, 1, vec![128]).unwrap()), Err(CompositorError::AllIgnore)));
    }

    #[test]
    fn illegal_values_and_empty_alpha() {
        assert!(matches!(AnomalyMask::new(1, 1, vec![37]), Err(CompositorError::IllegalMaskValue(37))));
        assert!(matches!(ObjectCutout::new(1, 1, vec![1, 2, 3, 0], "x"), Err(CompositorError::EmptyAlpha)));
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = AnomalyMask::new(3, 2, vec![0, 128, 255, 255, 0, 0]).unwrap();
        m.save(&dir.path().join("m.png")).unwrap();
        assert_eq!(AnomalyMask::load(&dir.path().join("m.png")).unwrap(), m);
        let s = SceneImage::new(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        s.save(&dir.path().join("s.png")).unwrap();
        assert_eq!(SceneImage::load(&dir.path().join("s.png")).unwrap(), s);
        let c = ObjectCutout::new(1, 2, vec![9, 9, 9, 255, 0, 0, 0, 0], "dog").unwrap();
        c.save(&dir.path().join("c.png")).unwrap();
        assert_eq!(ObjectCutout::load(&dir.path().join("c.png"), "dog").unwrap(), c);
    }
}
