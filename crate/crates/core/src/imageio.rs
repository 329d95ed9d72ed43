//! Thin PNG helpers over the `image` crate.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageFormat};

pub type ImageResult<T> = Result<T, image::ImageError>;

fn ensure_parent(path: &Path) -> ImageResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(image::ImageError::IoError)?;
        }
    }
    Ok(())
}

fn write(path: &Path, w: usize, h: usize, data: &[u8], color: ExtendedColorType) -> ImageResult<()> {
    ensure_parent(path)?;
    image::save_buffer_with_format(path, data, w as u32, h as u32, color, ImageFormat::Png)
}

pub fn write_gray8(path: &Path, w: usize, h: usize, data: &[u8]) -> ImageResult<()> {
    write(path, w, h, data, ExtendedColorType::L8)
}

pub fn write_rgb8(path: &Path, w: usize, h: usize, data: &[u8]) -> ImageResult<()> {
    write(path, w, h, data, ExtendedColorType::Rgb8)
}

pub fn write_rgba8(path: &Path, w: usize, h: usize, data: &[u8]) -> ImageResult<()> {
    write(path, w, h, data, ExtendedColorType::Rgba8)
}

pub fn write_gray16(path: &Path, w: usize, h: usize, data: &[u16]) -> ImageResult<()> {
    ensure_parent(path)?;
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(w as u32, h as u32, data.to_vec())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
}

pub fn read(path: &Path) -> ImageResult<DynamicImage> {
    image::ImageReader::open(path)?.with_guessed_format()?.decode()
}

/// Encodes raw pixels as PNG bytes.
pub fn encode_png(w: usize, h: usize, data: &[u8], color: ExtendedColorType) -> ImageResult<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    image::write_buffer_with_format(&mut out, data, w as u32, h as u32, color, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> ImageResult<DynamicImage> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
}
