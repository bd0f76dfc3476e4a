//! Adapter contracts for the heavy externals (text encoder, denoiser, latent
//! codec, face recognition, scoring, sampling) and the registry that builds a
//! full backend set by name.
//!
//! The `synthetic` backend set is deterministic and small enough to run the
//! whole pipeline on a laptop without model weights. Real backends plug in by
//! registering a factory under another name.

mod face;
mod text;
mod toy;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::mapper::FaceFeature;
use crate::trainer::NoiseSchedule;

pub use face::{DetectorRule, MockDetector, MockScorer, SyntheticFaceEncoder};
pub use text::SyntheticTextEncoder;
pub use toy::{LatentShape, SyntheticSampler, ToyCodec, ToyDenoiser};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// SHA-256 digest of a parameter tensor's bytes.
pub type ParamDigest = [u8; 32];

pub fn digest_f64s<'a>(values: impl IntoIterator<Item = &'a f64>) -> ParamDigest {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

/// Metadata every adapter declares.
pub trait AdapterInfo {
    fn id(&self) -> String;

    fn deterministic(&self) -> bool {
        true
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    /// Digests of every parameter tensor, keyed by a stable name. Used to
    /// prove the backbone stays frozen during personalization.
    fn parameter_digests(&self) -> Vec<(String, ParamDigest)> {
        Vec::new()
    }
}

/// Tokenizer, embedding dictionary and text transformer.
///
/// Sequences are `l x d` matrices with one row per position.
pub trait TextEncoder: AdapterInfo + Send + Sync {
    fn dim(&self) -> usize;

    fn max_len(&self) -> usize;

    /// Tokens of `text` without begin/end sentinels.
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>>;

    fn begin_token(&self) -> Option<TokenId>;

    fn end_token(&self) -> Option<TokenId>;

    /// Pure dictionary lookup, one row per id.
    fn dictionary_embed(&self, ids: &[TokenId]) -> Result<DMatrix<f64>>;

    /// Length-preserving text transformer.
    fn transform(&self, sequence: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Vector-Jacobian product of [`TextEncoder::transform`].
    fn transform_vjp(&self, sequence: &DMatrix<f64>, grad: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

/// Noise-prediction network. Always frozen unless the implementation
/// deliberately reports itself trainable.
pub trait Denoiser: AdapterInfo + Send + Sync {
    fn schedule(&self) -> &NoiseSchedule;

    fn latent_len(&self) -> usize;

    fn predict_noise(&self, z_t: &DVector<f64>, t: usize, cond: &DMatrix<f64>) -> Result<DVector<f64>>;

    /// Gradient of `<grad_out, predict_noise(..)>` with respect to `cond`.
    fn condition_vjp(
        &self,
        z_t: &DVector<f64>,
        t: usize,
        cond: &DMatrix<f64>,
        grad_out: &DVector<f64>,
    ) -> Result<DMatrix<f64>>;

    fn is_trainable(&self) -> bool {
        false
    }

    /// Only called by the trainer when [`Denoiser::is_trainable`] is true.
    fn apply_gradient(
        &mut self,
        _z_t: &DVector<f64>,
        _t: usize,
        _cond: &DMatrix<f64>,
        _grad_out: &DVector<f64>,
        _lr: f64,
    ) {
    }
}

/// Image <-> latent autoencoder.
pub trait LatentCodec: AdapterInfo + Send + Sync {
    fn latent_len(&self) -> usize;
    fn encode(&self, image: &Image) -> Result<DVector<f64>>;
    fn decode(&self, latent: &DVector<f64>) -> Result<Image>;
}

pub trait FaceEncoder: AdapterInfo + Send + Sync {
    /// Returns [`Error::NoFace`] when no face can be located.
    fn extract(&self, image: &Image) -> Result<FaceFeature>;
}

pub trait FaceDetector: AdapterInfo + Send + Sync {
    fn detect(&self, image: &Image) -> Result<bool>;
}

/// Image-text similarity (CLIP score style).
pub trait ImageScorer: AdapterInfo + Send + Sync {
    fn score(&self, image: &Image, text: &str) -> Result<f64>;
}

/// Sampler parameters are forwarded to the sampler untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerParams {
    pub steps: usize,
    pub guidance: f64,
    pub extra: BTreeMap<String, String>,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            steps: 50,
            guidance: 7.5,
            extra: BTreeMap::new(),
        }
    }
}

pub trait Sampler: AdapterInfo + Send + Sync {
    fn sample(&self, cond: &DMatrix<f64>, seed: u64, params: &SamplerParams) -> Result<Image>;
}

/// Configuration keys selecting and parameterizing a backend set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub name: String,
    pub seed: u64,
    pub embed_dim: usize,
    pub max_len: usize,
    /// Norm of a typical dictionary embedding in the synthetic encoder.
    pub embed_scale: f64,
    pub latent: LatentShape,
    /// Gain of the toy denoiser's condition decoder.
    pub denoiser_gain: f64,
    pub detector: DetectorRule,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            name: "synthetic".into(),
            seed: 0,
            embed_dim: 768,
            max_len: 77,
            embed_scale: 0.1,
            latent: LatentShape::default(),
            denoiser_gain: 24.0,
            detector: DetectorRule::Always,
        }
    }
}

/// One instance of every adapter the pipeline consumes.
pub struct Backends {
    pub text: Box<dyn TextEncoder>,
    pub denoiser: Box<dyn Denoiser>,
    pub codec: Box<dyn LatentCodec>,
    pub face: Box<dyn FaceEncoder>,
    pub detector: Box<dyn FaceDetector>,
    pub scorer: Box<dyn ImageScorer>,
    pub sampler: Box<dyn Sampler>,
}

impl Backends {
    pub fn synthetic(cfg: &BackendConfig) -> Result<Self> {
        let text = SyntheticTextEncoder::new(cfg.seed, cfg.embed_dim, cfg.max_len)?
            .with_scale(cfg.embed_scale);
        let denoiser = ToyDenoiser::new(cfg.seed, cfg.latent, cfg.embed_dim, cfg.denoiser_gain)?;
        let codec = ToyCodec::new(cfg.latent);
        let sampler = SyntheticSampler::new(denoiser.clone(), codec.clone());
        Ok(Backends {
            text: Box::new(text),
            denoiser: Box::new(denoiser),
            codec: Box::new(codec),
            face: Box::new(SyntheticFaceEncoder::new(cfg.seed)),
            detector: Box::new(MockDetector::new(cfg.detector.clone())),
            scorer: Box::new(MockScorer::new(cfg.seed)),
            sampler: Box::new(sampler),
        })
    }

    /// Adapter identifiers keyed by role, for run manifests and reports.
    pub fn identifiers(&self) -> BTreeMap<String, String> {
        [
            ("text_encoder", self.text.id()),
            ("denoiser", self.denoiser.id()),
            ("codec", self.codec.id()),
            ("face_encoder", self.face.id()),
            ("detector", self.detector.id()),
            ("scorer", self.scorer.id()),
            ("sampler", self.sampler.id()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

pub type BackendFactory = Box<dyn Fn(&BackendConfig) -> Result<Backends> + Send + Sync>;

/// Name -> factory table. `synthetic` is always registered.
pub struct Registry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut registry = Registry {
            factories: BTreeMap::new(),
        };
        registry.register("synthetic", Box::new(Backends::synthetic));
        registry
    }
}

impl Registry {
    pub fn register(&mut self, name: &str, factory: BackendFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, cfg: &BackendConfig) -> Result<Backends> {
        let factory = self.factories.get(&cfg.name).ok_or_else(|| {
            Error::Adapter(format!(
                "backend '{}' is not available (registered: {})",
                cfg.name,
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(cfg)
    }
}
