//! Face feature -> identity coefficients: one affine layer followed by an L2
//! normalization of each coefficient group.

mod checkpoint;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::IdentityCoefficients;
use crate::error::{Error, Result};
use crate::hash::derive_seed;

pub use checkpoint::{
    checkpoint_len, load_identity, save_identity, FingerprintPolicy, IdentityCheckpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, HALF_QUANTIZATION_BOUND,
};

pub const FACE_FEATURE_DIM: usize = 512;

/// Guards the normalization against an all-zero group.
pub const NORM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceFeature {
    values: DVector<f64>,
    source: String,
}

impl FaceFeature {
    pub fn new(values: DVector<f64>, source: impl Into<String>) -> Result<Self> {
        if values.len() != FACE_FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                what: "face feature",
                expected: FACE_FEATURE_DIM,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("face feature".into()));
        }
        Ok(FaceFeature {
            values,
            source: source.into(),
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// `a = r / max(|r|, eps)`.
pub fn l2_normalize(raw: &DVector<f64>) -> DVector<f64> {
    raw / raw.norm().max(NORM_EPSILON)
}

/// Vector-Jacobian product of [`l2_normalize`] at `raw`.
pub fn l2_normalize_vjp(raw: &DVector<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let norm = raw.norm();
    if norm <= NORM_EPSILON {
        return grad / NORM_EPSILON;
    }
    let a = raw / norm;
    (grad - &a * a.dot(grad)) / norm
}

/// Split a `2p` vector into two independently normalized groups.
pub fn normalize_groups(raw: &DVector<f64>) -> Result<IdentityCoefficients> {
    if !raw.len().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            what: "raw coefficient vector (must be even)",
            expected: raw.len() + 1,
            actual: raw.len(),
        });
    }
    let p = raw.len() / 2;
    IdentityCoefficients::new(
        l2_normalize(&raw.rows(0, p).into_owned()),
        l2_normalize(&raw.rows(p, p).into_owned()),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapperGradient {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl MapperGradient {
    pub fn zeros(p: usize) -> Self {
        MapperGradient {
            weight: DMatrix::zeros(2 * p, FACE_FEATURE_DIM),
            bias: DVector::zeros(2 * p),
        }
    }

    pub fn accumulate(&mut self, other: &MapperGradient) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }
}

/// Trainable affine layer `512 -> 2p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingNetwork {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub seed: u64,
}

impl MappingNetwork {
    /// Weights uniform in `+-1/sqrt(512)`, zero bias.
    pub fn init(p: usize, seed: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        let bound = 1.0 / (FACE_FEATURE_DIM as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mapper.weight"));
        let weight = DMatrix::from_fn(2 * p, FACE_FEATURE_DIM, |_, _| {
            rng.random_range(-bound..bound)
        });
        Ok(MappingNetwork {
            weight,
            bias: DVector::zeros(2 * p),
            seed,
        })
    }

    pub fn p(&self) -> usize {
        self.bias.len() / 2
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn raw_output(&self, feature: &FaceFeature) -> DVector<f64> {
        &self.weight * feature.values() + &self.bias
    }

    /// Gradient of a loss with respect to the weights, given the gradient on
    /// the normalized coefficients.
    pub fn backward(
        &self,
        feature: &FaceFeature,
        grad: &IdentityCoefficients,
    ) -> MapperGradient {
        let p = self.p();
        let raw = self.raw_output(feature);
        let g1 = l2_normalize_vjp(&raw.rows(0, p).into_owned(), &grad.a1);
        let g2 = l2_normalize_vjp(&raw.rows(p, p).into_owned(), &grad.a2);
        let mut g_raw = DVector::zeros(2 * p);
        g_raw.rows_mut(0, p).copy_from(&g1);
        g_raw.rows_mut(p, p).copy_from(&g2);
        MapperGradient {
            weight: &g_raw * feature.values().transpose(),
            bias: g_raw,
        }
    }

    pub fn step(&mut self, grad: &MapperGradient, lr: f64) {
        self.weight -= &grad.weight * lr;
        self.bias -= &grad.bias * lr;
    }
}

pub fn map_to_coefficients(
    feature: &FaceFeature,
    net: &MappingNetwork,
) -> Result<IdentityCoefficients> {
    if net.weight.ncols() != FACE_FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            what: "mapping network input",
            expected: FACE_FEATURE_DIM,
            actual: net.weight.ncols(),
        });
    }
    if net.weight.nrows() != net.bias.len() {
        return Err(Error::DimensionMismatch {
            what: "mapping network bias",
            expected: net.weight.nrows(),
            actual: net.bias.len(),
        });
    }
    normalize_groups(&net.raw_output(feature))
}
