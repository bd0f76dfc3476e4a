use image::imageops::{self, FilterType};
use image::Rgb;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip: bool,
    /// Per-channel gain in `[1-s, 1+s]` and bias in `[-s, s]`.
    pub jitter: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Paste the rescaled image at a random offset instead of centered.
    pub shift: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip: true,
            jitter: 0.2,
            min_scale: 0.1,
            max_scale: 1.0,
            shift: true,
        }
    }
}

impl AugmentConfig {
    /// Identity transform.
    pub fn none() -> Self {
        AugmentConfig {
            flip: false,
            jitter: 0.0,
            min_scale: 1.0,
            max_scale: 1.0,
            shift: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.jitter.is_finite()
            && (0.0..1.0).contains(&self.jitter)
            && self.min_scale > 0.0
            && self.min_scale <= self.max_scale
            && self.max_scale <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "augmentation out of range: jitter {} scale [{}, {}]",
                self.jitter, self.min_scale, self.max_scale
            )))
        }
    }
}

/// Flip, color jitter, then shrink onto a black canvas of the original size.
/// Random draws happen in that order regardless of which steps are enabled.
pub fn augment<R: Rng + ?Sized>(image: &Image, cfg: &AugmentConfig, rng: &mut R) -> Image {
    let flip = rng.random_bool(0.5);
    let mut gains = [0.0f64; 3];
    let mut biases = [0.0f64; 3];
    for c in 0..3 {
        gains[c] = rng.random_range(-1.0..=1.0);
        biases[c] = rng.random_range(-1.0..=1.0);
    }
    let scale_u: f64 = rng.random();
    let (off_x, off_y): (f64, f64) = (rng.random(), rng.random());

    let (w, h) = image.dimensions();
    let mut out = if cfg.flip && flip {
        imageops::flip_horizontal(image)
    } else {
        image.clone()
    };

    if cfg.jitter > 0.0 {
        let s = cfg.jitter;
        for px in out.pixels_mut() {
            for c in 0..3 {
                let v = px.0[c] as f64 * (1.0 + s * gains[c]) + s * biases[c];
                px.0[c] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }

    let scale = cfg.min_scale + (cfg.max_scale - cfg.min_scale) * scale_u;
    let nw = ((w as f64 * scale).round() as u32).clamp(1, w);
    let nh = ((h as f64 * scale).round() as u32).clamp(1, h);
    if (nw, nh) == (w, h) {
        return out;
    }
    let small = imageops::resize(&out, nw, nh, FilterType::Triangle);
    let (fx, fy) = if cfg.shift { (off_x, off_y) } else { (0.5, 0.5) };
    let x = ((w - nw) as f64 * fx).round() as i64;
    let y = ((h - nh) as f64 * fy).round() as i64;
    out = Image::from_pixel(w, h, Rgb([0.0; 3]));
    imageops::replace(&mut out, &small, x, y);
    out
}
