//! Identity optimization: only the mapping network (or, in direct mode, the
//! raw coefficients) is updated. Every adapter and the basis stay frozen.

mod audit;
mod augment;
mod loss;
mod prompts;
mod schedule;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::backends::Backends;
use crate::basis::{CelebBasis, IdentityCoefficients};
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::image::Image;
use crate::mapper::{l2_normalize, map_to_coefficients, FaceFeature, MapperGradient, MappingNetwork};

pub use audit::{frozen_audit, snapshot, AuditReport, ParameterSnapshot};
pub use augment::{augment, AugmentConfig};
pub use loss::{condition_for, denoising_loss, evaluate_sample, sample_loss, Evaluation, TrainingSample};
pub use prompts::{
    substitute_identity, training_prompts, ConditionedSequence, PlaceholderSpan, PromptTemplate,
    Segment,
};
pub use schedule::{noise_image, noise_with_alpha_bar, NoiseSchedule};

pub const SINGLE_LABEL: &str = "identity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Mlp,
    Direct,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(TrainMode::Mlp),
            "direct" => Ok(TrainMode::Direct),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected mlp or direct)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub augmentation: AugmentConfig,
    pub mode: TrainMode,
    pub p: usize,
    /// Heavy-ball momentum; 0 is plain SGD.
    pub momentum: f64,
    /// Fixed draws per label used for the before/after loss probe.
    pub probe_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            batch_size: 2,
            steps: 400,
            seed: 0,
            augmentation: AugmentConfig::default(),
            mode: TrainMode::Mlp,
            p: 512,
            momentum: 0.0,
            probe_samples: 16,
        }
    }
}

impl TrainConfig {
    pub fn joint() -> Self {
        TrainConfig {
            steps: 2500,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        self.augmentation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub loss: f64,
    pub label: String,
}

impl LogEntry {
    pub fn line(&self) -> String {
        format!("{}\t{:.8}\t{}", self.step, self.loss, self.label)
    }
}

/// Mean loss per step, in step order.
pub fn step_losses(log: &[LogEntry]) -> Vec<f64> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in log {
        let s = sums.entry(e.step).or_default();
        s.0 += e.loss;
        s.1 += 1;
    }
    sums.values().map(|(s, n)| s / *n as f64).collect()
}

/// Means of the first and last `window` values.
pub fn window_means(values: &[f64], window: usize) -> Option<(f64, f64)> {
    if window == 0 || values.len() < window {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&values[..window]), mean(&values[values.len() - window..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedIdentity {
    pub label: String,
    pub coefficients: IdentityCoefficients,
    pub initial_probe_loss: f64,
    pub final_probe_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// `None` in direct mode.
    pub network: Option<MappingNetwork>,
    pub identities: Vec<TrainedIdentity>,
    pub log: Vec<LogEntry>,
}

impl TrainOutcome {
    pub fn identity(&self, label: &str) -> Option<&TrainedIdentity> {
        self.identities.iter().find(|i| i.label == label)
    }
}

struct Subject {
    label: String,
    image: Image,
    feature: FaceFeature,
    clean_latent: DVector<f64>,
}

enum Params {
    Mlp {
        net: MappingNetwork,
        velocity: MapperGradient,
    },
    Direct {
        coeffs: Vec<IdentityCoefficients>,
        velocity: Vec<IdentityCoefficients>,
    },
}

impl Params {
    fn coefficients(&self, index: usize, subject: &Subject) -> Result<IdentityCoefficients> {
        match self {
            Params::Mlp { net, .. } => map_to_coefficients(&subject.feature, net),
            Params::Direct { coeffs, .. } => Ok(coeffs[index].clone()),
        }
    }
}

pub fn train_single(
    image: &Image,
    basis: &CelebBasis,
    backends: &mut Backends,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_joint(&[(SINGLE_LABEL.to_string(), image.clone())], basis, backends, cfg)
}

/// One shared network over several labelled images. Each batch element draws
/// its label uniformly.
pub fn train_joint(
    images: &[(String, Image)],
    basis: &CelebBasis,
    backends: &mut Backends,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("no training images".into()));
    }
    if cfg.p != basis.p() {
        return Err(Error::DimensionMismatch {
            what: "training p vs basis p",
            expected: basis.p(),
            actual: cfg.p,
        });
    }
    let mut subjects = Vec::with_capacity(images.len());
    for (label, image) in images {
        if subjects.iter().any(|s: &Subject| &s.label == label) {
            return Err(Error::InvalidArgument(format!("duplicate label '{label}'")));
        }
        subjects.push(Subject {
            label: label.clone(),
            feature: backends.face.extract(image)?,
            clean_latent: backends.codec.encode(image)?,
            image: image.clone(),
        });
    }

    let p = basis.p();
    let mut params = match cfg.mode {
        TrainMode::Mlp => Params::Mlp {
            net: MappingNetwork::init(p, cfg.seed)?,
            velocity: MapperGradient::zeros(p),
        },
        TrainMode::Direct => Params::Direct {
            coeffs: subjects
                .iter()
                .map(|s| random_coefficients(p, derive_seed(cfg.seed, &format!("direct.{}", s.label))))
                .collect::<Result<_>>()?,
            velocity: vec![IdentityCoefficients::zeros(p); subjects.len()],
        },
    };

    let templates = training_prompts();
    let probes: Vec<Vec<TrainingSample>> = subjects
        .iter()
        .map(|s| probe_samples(s, &templates, backends, cfg))
        .collect();
    let initial: Vec<f64> = subjects
        .iter()
        .enumerate()
        .map(|(i, s)| probe_mean(&params.coefficients(i, s)?, &probes[i], basis, backends))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train"));
    let schedule_len = backends.denoiser.schedule().len();
    let n = backends.codec.latent_len();
    let mut log = Vec::with_capacity(cfg.steps * cfg.batch_size);

    for step in 0..cfg.steps {
        let mut net_grad = MapperGradient::zeros(p);
        let mut direct_grads = vec![IdentityCoefficients::zeros(p); subjects.len()];
        for _ in 0..cfg.batch_size {
            let index = if subjects.len() == 1 {
                0
            } else {
                rng.random_range(0..subjects.len())
            };
            let subject = &subjects[index];
            let template = templates[rng.random_range(0..templates.len())].clone();
            let augmented = augment(&subject.image, &cfg.augmentation, &mut rng);
            let z0 = backends.codec.encode(&augmented)?;
            let t = rng.random_range(1..=schedule_len);
            let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sample = TrainingSample { template, z0, t, eps };

            let coeffs = params.coefficients(index, subject)?;
            let eval = evaluate_sample(&coeffs, &sample, basis, backends)?;
            if !eval.loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at step {step} (label {}, t = {t})",
                    subject.label
                )));
            }
            log.push(LogEntry {
                step,
                loss: eval.loss,
                label: subject.label.clone(),
            });
            let scale = 1.0 / cfg.batch_size as f64;
            match &params {
                Params::Mlp { net, .. } => {
                    let mut g = net.backward(&subject.feature, &eval.coefficient_grad);
                    g.weight *= scale;
                    g.bias *= scale;
                    net_grad.accumulate(&g);
                }
                Params::Direct { .. } => {
                    direct_grads[index].a1 += &eval.coefficient_grad.a1 * scale;
                    direct_grads[index].a2 += &eval.coefficient_grad.a2 * scale;
                }
            }
            if backends.denoiser.is_trainable() {
                let g = &eval.grad_pred * scale;
                backends
                    .denoiser
                    .apply_gradient(&eval.z_t, t, &eval.cond, &g, cfg.learning_rate);
            }
        }
        apply_update(&mut params, net_grad, direct_grads, cfg)?;
    }

    let mut identities = Vec::with_capacity(subjects.len());
    for (i, s) in subjects.iter().enumerate() {
        let coefficients = params.coefficients(i, s)?;
        let final_probe_loss = probe_mean(&coefficients, &probes[i], basis, backends)?;
        identities.push(TrainedIdentity {
            label: s.label.clone(),
            coefficients,
            initial_probe_loss: initial[i],
            final_probe_loss,
        });
    }
    Ok(TrainOutcome {
        network: match params {
            Params::Mlp { net, .. } => Some(net),
            Params::Direct { .. } => None,
        },
        identities,
        log,
    })
}

fn apply_update(
    params: &mut Params,
    net_grad: MapperGradient,
    direct_grads: Vec<IdentityCoefficients>,
    cfg: &TrainConfig,
) -> Result<()> {
    let lr = cfg.learning_rate;
    let mu = cfg.momentum;
    match params {
        Params::Mlp { net, velocity } => {
            velocity.weight *= mu;
            velocity.bias *= mu;
            velocity.accumulate(&net_grad);
            net.step(velocity, lr);
            if net.weight.iter().chain(net.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("mapping network parameters".into()));
            }
        }
        Params::Direct { coeffs, velocity } => {
            for ((c, v), g) in coeffs.iter_mut().zip(velocity.iter_mut()).zip(direct_grads) {
                v.a1 = &v.a1 * mu + g.a1;
                v.a2 = &v.a2 * mu + g.a2;
                *c = IdentityCoefficients::new(
                    l2_normalize(&(&c.a1 - &v.a1 * lr)),
                    l2_normalize(&(&c.a2 - &v.a2 * lr)),
                )?;
            }
        }
    }
    Ok(())
}

fn random_coefficients(p: usize, seed: u64) -> Result<IdentityCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || l2_normalize(&DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let a1 = draw();
    let a2 = draw();
    IdentityCoefficients::new(a1, a2)
}

fn probe_samples(
    subject: &Subject,
    templates: &[PromptTemplate],
    backends: &Backends,
    cfg: &TrainConfig,
) -> Vec<TrainingSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("probe.{}", subject.label)));
    let schedule_len = backends.denoiser.schedule().len();
    let n = subject.clean_latent.len();
    (0..cfg.probe_samples)
        .map(|i| TrainingSample {
            template: templates[i % templates.len()].clone(),
            z0: subject.clean_latent.clone(),
            t: rng.random_range(1..=schedule_len),
            eps: DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
        })
        .collect()
}

/// Mean loss over fixed samples; `NaN` when there are none.
pub fn probe_mean(
    coeffs: &IdentityCoefficients,
    samples: &[TrainingSample],
    basis: &CelebBasis,
    backends: &Backends,
) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        total += sample_loss(coeffs, s, basis, backends)?;
    }
    Ok(total / samples.len() as f64)
}
