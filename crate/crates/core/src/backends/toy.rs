use image::imageops::{self, FilterType};
use image::Rgb;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    digest_f64s, AdapterInfo, Denoiser, LatentCodec, ParamDigest, Sampler, SamplerParams,
};
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::image::Image;
use crate::trainer::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for LatentShape {
    fn default() -> Self {
        LatentShape {
            channels: 4,
            height: 8,
            width: 8,
        }
    }
}

impl LatentShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Small differentiable noise predictor with fixed parameters.
///
/// The mean-pooled condition is decoded linearly into a clean-latent estimate
/// `x0 = W pool(c) + b`, and the prediction is the posterior-mean noise under
/// a Gaussian prior `N(x0, v I)` on the clean latent:
/// `eps = sigma * (z_t - s * x0) / (v * s^2 + sigma^2)` with `s = sqrt(a)`,
/// `sigma = sqrt(1 - a)` and `a` the cumulative alpha at `t`.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ToyDenoiser {
    seed: u64,
    shape: LatentShape,
    cond_dim: usize,
    gain: f64,
    prior_variance: f64,
    schedule: NoiseSchedule,
    decoder: DMatrix<f64>,
    bias: DVector<f64>,
    trainable: bool,
}

impl ToyDenoiser {
    pub fn new(seed: u64, shape: LatentShape, cond_dim: usize, gain: f64) -> Result<Self> {
        if shape.is_empty() || cond_dim == 0 {
            return Err(Error::InvalidArgument("toy denoiser needs nonzero dims".into()));
        }
        let n = shape.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "denoiser.decoder"));
        let decoder = DMatrix::from_fn(n, cond_dim, |_, _| {
            gain * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "denoiser.bias"));
        let bias = DVector::from_fn(n, |_, _| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        Ok(ToyDenoiser {
            seed,
            shape,
            cond_dim,
            gain,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            schedule: NoiseSchedule::default(),
            decoder,
            bias,
            trainable: false,
        })
    }

    pub fn with_prior_variance(mut self, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument("prior variance must be positive".into()));
        }
        self.prior_variance = v;
        Ok(self)
    }

    /// Escape hatch for negative tests: a trainable denoiser lets the trainer
    /// update its decoder, which the frozen audit must then detect.
    pub fn unfreeze(&mut self) {
        self.trainable = true;
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    fn check(&self, z_t: &DVector<f64>, cond: &DMatrix<f64>) -> Result<()> {
        if z_t.len() != self.shape.len() {
            return Err(Error::DimensionMismatch {
                what: "latent",
                expected: self.shape.len(),
                actual: z_t.len(),
            });
        }
        if cond.ncols() != self.cond_dim {
            return Err(Error::DimensionMismatch {
                what: "condition width",
                expected: self.cond_dim,
                actual: cond.ncols(),
            });
        }
        if cond.nrows() == 0 {
            return Err(Error::InvalidArgument("empty condition sequence".into()));
        }
        Ok(())
    }

    fn pooled(cond: &DMatrix<f64>) -> DVector<f64> {
        cond.row_mean().transpose()
    }

    /// `(s, w)` such that `eps = w * (z_t - s * x0)`.
    fn coefficients(&self, t: usize) -> Result<(f64, f64)> {
        let a = self.schedule.alpha_bar(t)?;
        let sigma = (1.0 - a).sqrt();
        Ok((a.sqrt(), sigma / (self.prior_variance * a + 1.0 - a)))
    }
}

impl AdapterInfo for ToyDenoiser {
    fn id(&self) -> String {
        format!(
            "toy-denoiser(seed={},latent={}x{}x{},cond={},gain={},prior={})",
            self.seed,
            self.shape.channels,
            self.shape.height,
            self.shape.width,
            self.cond_dim,
            self.gain,
            self.prior_variance
        )
    }

    fn parameter_digests(&self) -> Vec<(String, ParamDigest)> {
        vec![
            ("denoiser.decoder".into(), digest_f64s(self.decoder.iter())),
            ("denoiser.bias".into(), digest_f64s(self.bias.iter())),
            ("denoiser.schedule".into(), digest_f64s(self.schedule.betas())),
        ]
    }
}

impl Denoiser for ToyDenoiser {
    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn latent_len(&self) -> usize {
        self.shape.len()
    }

    fn predict_noise(&self, z_t: &DVector<f64>, t: usize, cond: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(z_t, cond)?;
        let (s, w) = self.coefficients(t)?;
        let x0 = &self.decoder * Self::pooled(cond) + &self.bias;
        Ok((z_t - x0 * s) * w)
    }

    fn condition_vjp(
        &self,
        z_t: &DVector<f64>,
        t: usize,
        cond: &DMatrix<f64>,
        grad_out: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check(z_t, cond)?;
        let (s, w) = self.coefficients(t)?;
        let l = cond.nrows();
        let grad_pool = self.decoder.tr_mul(grad_out) * (-s * w / l as f64);
        Ok(DMatrix::from_fn(l, self.cond_dim, |_, c| grad_pool[c]))
    }

    fn is_trainable(&self) -> bool {
        self.trainable
    }

    fn apply_gradient(
        &mut self,
        _z_t: &DVector<f64>,
        t: usize,
        cond: &DMatrix<f64>,
        grad_out: &DVector<f64>,
        lr: f64,
    ) {
        if !self.trainable {
            return;
        }
        let Ok((s, w)) = self.coefficients(t) else {
            return;
        };
        let grad_x0 = grad_out * (-s * w);
        let pool = Self::pooled(cond);
        self.decoder -= &grad_x0 * pool.transpose() * lr;
        self.bias -= grad_x0 * lr;
    }
}

/// Fixed linear "autoencoder": area-resize to the latent grid, map RGB in
/// `[-1, 1]` to latent channels, and back via the pseudo-inverse.
#[derive(Debug, Clone)]
pub struct ToyCodec {
    shape: LatentShape,
    mix: DMatrix<f64>,
    unmix: DMatrix<f64>,
    output_size: u32,
}

impl ToyCodec {
    pub fn new(shape: LatentShape) -> Self {
        let mix = DMatrix::from_fn(shape.channels, 3, |c, k| {
            0.6 * (0.9 * (c + 1) as f64 * (k + 1) as f64).cos()
        });
        let unmix = mix
            .clone()
            .pseudo_inverse(1e-12)
            .expect("pseudo-inverse of a fixed small matrix");
        ToyCodec {
            shape,
            mix,
            unmix,
            output_size: 64,
        }
    }

    pub fn with_output_size(mut self, size: u32) -> Self {
        self.output_size = size.max(1);
        self
    }
}

impl AdapterInfo for ToyCodec {
    fn id(&self) -> String {
        format!(
            "toy-codec(latent={}x{}x{},out={})",
            self.shape.channels, self.shape.height, self.shape.width, self.output_size
        )
    }

    fn parameter_digests(&self) -> Vec<(String, ParamDigest)> {
        vec![("codec.mix".into(), digest_f64s(self.mix.iter()))]
    }
}

impl LatentCodec for ToyCodec {
    fn latent_len(&self) -> usize {
        self.shape.len()
    }

    fn encode(&self, image: &Image) -> Result<DVector<f64>> {
        let (w, h) = (self.shape.width, self.shape.height);
        let small = imageops::resize(image, w as u32, h as u32, FilterType::Triangle);
        let mut latent = DVector::zeros(self.shape.len());
        for y in 0..h {
            for x in 0..w {
                let px = small.get_pixel(x as u32, y as u32).0;
                for c in 0..self.shape.channels {
                    let v: f64 = (0..3)
                        .map(|k| self.mix[(c, k)] * (2.0 * f64::from(px[k]) - 1.0))
                        .sum();
                    latent[c * h * w + y * w + x] = v;
                }
            }
        }
        Ok(latent)
    }

    fn decode(&self, latent: &DVector<f64>) -> Result<Image> {
        if latent.len() != self.shape.len() {
            return Err(Error::DimensionMismatch {
                what: "latent",
                expected: self.shape.len(),
                actual: latent.len(),
            });
        }
        let (w, h) = (self.shape.width, self.shape.height);
        let small = Image::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            let mut rgb = [0f32; 3];
            for (k, out) in rgb.iter_mut().enumerate() {
                let v: f64 = (0..self.shape.channels)
                    .map(|c| self.unmix[(k, c)] * latent[c * h * w + y * w + x])
                    .sum();
                *out = ((v + 1.0) / 2.0).clamp(0.0, 1.0) as f32;
            }
            Rgb(rgb)
        });
        Ok(imageops::resize(
            &small,
            self.output_size,
            self.output_size,
            FilterType::Nearest,
        ))
    }
}

/// Deterministic DDIM (eta = 0) sampler over the toy denoiser and codec.
/// Guidance is accepted and recorded but has no effect on the toy model.
#[derive(Debug, Clone)]
pub struct SyntheticSampler {
    denoiser: ToyDenoiser,
    codec: ToyCodec,
}

impl SyntheticSampler {
    pub fn new(denoiser: ToyDenoiser, codec: ToyCodec) -> Self {
        SyntheticSampler { denoiser, codec }
    }
}

impl AdapterInfo for SyntheticSampler {
    fn id(&self) -> String {
        format!("ddim[{}|{}]", self.denoiser.id(), self.codec.id())
    }
}

impl Sampler for SyntheticSampler {
    fn sample(&self, cond: &DMatrix<f64>, seed: u64, params: &SamplerParams) -> Result<Image> {
        let schedule = self.denoiser.schedule();
        let total = schedule.len();
        let steps = params.steps.clamp(1, total);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sampler"));
        let mut x = DVector::from_fn(self.denoiser.latent_len(), |_, _| {
            StandardNormal.sample(&mut rng)
        });
        let timesteps: Vec<usize> = (0..steps).map(|i| total - i * total / steps).collect();
        for (i, &t) in timesteps.iter().enumerate() {
            let eps = self.denoiser.predict_noise(&x, t, cond)?;
            let a = schedule.alpha_bar(t)?;
            let a_prev = match timesteps.get(i + 1) {
                Some(&next) => schedule.alpha_bar(next)?,
                None => 1.0,
            };
            let x0 = (&x - &eps * (1.0 - a).sqrt()) / a.sqrt();
            x = x0 * a_prev.sqrt() + eps * (1.0 - a_prev).sqrt();
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampler output".into()));
        }
        self.codec.decode(&x)
    }
}
