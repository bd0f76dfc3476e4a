use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AdapterInfo, FaceDetector, FaceEncoder, ImageScorer};
use crate::error::{Error, Result};
use crate::hash::{fnv1a64, Fnv1a};
use crate::image::{content_hash, Image};
use crate::mapper::{FaceFeature, FACE_FEATURE_DIM};

/// Unit-norm Gaussian vector seeded by `(seed, domain, key)`.
fn hashed_unit_vector(seed: u64, domain: &str, key: u64, dim: usize) -> DVector<f64> {
    let stream = Fnv1a::new()
        .write_u64(seed)
        .write(domain.as_bytes())
        .write_u64(key)
        .finish();
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let v = DVector::from_fn(dim, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let norm = v.norm();
    // A Gaussian draw of this size has norm > 0 with probability one; guard anyway.
    if norm > 0.0 {
        v / norm
    } else {
        let mut e = DVector::zeros(dim);
        e[0] = 1.0;
        e
    }
}

/// Face "recognizer" whose feature is a deterministic function of the image
/// content hash. Identical images map to identical features; any pixel change
/// gives an unrelated feature.
#[derive(Debug, Clone)]
pub struct SyntheticFaceEncoder {
    seed: u64,
}

impl SyntheticFaceEncoder {
    pub fn new(seed: u64) -> Self {
        SyntheticFaceEncoder { seed }
    }
}

impl AdapterInfo for SyntheticFaceEncoder {
    fn id(&self) -> String {
        format!("synthetic-face(seed={})", self.seed)
    }
}

impl FaceEncoder for SyntheticFaceEncoder {
    fn extract(&self, image: &Image) -> Result<FaceFeature> {
        let values = hashed_unit_vector(self.seed, "face", content_hash(image), FACE_FEATURE_DIM);
        FaceFeature::new(values, self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DetectorRule {
    Always,
    Never,
    /// Detect when the luminance standard deviation is at least this value.
    MinContrast(f64),
}

impl FromStr for DetectorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always" => Ok(DetectorRule::Always),
            "never" => Ok(DetectorRule::Never),
            _ => s
                .strip_prefix("contrast>=")
                .and_then(|v| v.parse::<f64>().ok())
                .map(DetectorRule::MinContrast)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "detector rule '{s}' (expected always, never or contrast>=X)"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockDetector {
    rule: DetectorRule,
}

impl MockDetector {
    pub fn new(rule: DetectorRule) -> Self {
        MockDetector { rule }
    }
}

fn luminance_std(image: &Image) -> f64 {
    let n = (image.width() * image.height()) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let lum: Vec<f64> = image
        .pixels()
        .map(|p| 0.299 * f64::from(p.0[0]) + 0.587 * f64::from(p.0[1]) + 0.114 * f64::from(p.0[2]))
        .collect();
    let mean = lum.iter().sum::<f64>() / n;
    (lum.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

impl AdapterInfo for MockDetector {
    fn id(&self) -> String {
        format!("mock-detector({:?})", self.rule)
    }
}

impl FaceDetector for MockDetector {
    fn detect(&self, image: &Image) -> Result<bool> {
        Ok(match self.rule {
            DetectorRule::Always => true,
            DetectorRule::Never => false,
            DetectorRule::MinContrast(min) => luminance_std(image) >= min,
        })
    }
}

/// Image-text scorer: cosine between hashed features of the text and of
/// [`MockScorer::caption_for`] the image.
#[derive(Debug, Clone)]
pub struct MockScorer {
    seed: u64,
    dim: usize,
}

impl MockScorer {
    pub fn new(seed: u64) -> Self {
        MockScorer { seed, dim: 64 }
    }

    /// The text whose feature coincides with the image's feature.
    pub fn caption_for(image: &Image) -> String {
        format!("image:{:016x}", content_hash(image))
    }

    pub fn text_feature(&self, text: &str) -> DVector<f64> {
        hashed_unit_vector(self.seed, "scorer", fnv1a64(text.as_bytes()), self.dim)
    }

    pub fn image_feature(&self, image: &Image) -> DVector<f64> {
        self.text_feature(&Self::caption_for(image))
    }
}

impl AdapterInfo for MockScorer {
    fn id(&self) -> String {
        format!("mock-scorer(seed={},dim={})", self.seed, self.dim)
    }
}

impl ImageScorer for MockScorer {
    fn score(&self, image: &Image, text: &str) -> Result<f64> {
        Ok(crate::eval::cosine(&self.image_feature(image), &self.text_feature(text)))
    }
}
