//! Images are RGB with `f32` channels in `[0, 1]`.

use std::path::Path;

use image::{Rgb, Rgb32FImage, RgbImage};

use crate::error::{Error, Result};
use crate::hash::Fnv1a;

pub type Image = Rgb32FImage;

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dynamic = image::open(path)?;
    Ok(dynamic.to_rgb32f())
}

pub fn to_rgb8(img: &Image) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        Rgb(p.0.map(quantize))
    })
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encode as PNG bytes (8-bit RGB).
pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    to_rgb8(img).write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageFormat::Png,
    )?;
    Ok(bytes)
}

pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_png(img)?;
    crate::io::write_atomic(path.as_ref(), &bytes)
}

/// FNV-1a over the dimensions and the 8-bit quantized pixels, so the hash
/// survives a PNG round trip.
pub fn content_hash(img: &Image) -> u64 {
    let mut h = Fnv1a::new();
    h.write(&img.width().to_le_bytes());
    h.write(&img.height().to_le_bytes());
    h.write(to_rgb8(img).as_raw());
    h.finish()
}

pub fn solid(width: u32, height: u32, rgb: [f32; 3]) -> Image {
    Image::from_pixel(width, height, Rgb(rgb))
}

/// Tile images row-major into a grid of `columns` columns.
pub fn contact_sheet(images: &[Image], columns: u32) -> Result<Image> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("contact sheet needs at least one image".into()))?;
    let (w, h) = first.dimensions();
    let columns = columns.max(1).min(images.len() as u32);
    let rows = (images.len() as u32).div_ceil(columns);
    let mut sheet = Image::new(w * columns, h * rows);
    for (i, img) in images.iter().enumerate() {
        if img.dimensions() != (w, h) {
            return Err(Error::InvalidArgument(
                "contact sheet images must share dimensions".into(),
            ));
        }
        let (cx, cy) = (i as u32 % columns, i as u32 / columns);
        image::imageops::replace(&mut sheet, img, i64::from(cx * w), i64::from(cy * h));
    }
    Ok(sheet)
}
