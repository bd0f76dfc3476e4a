//! The celeb basis: for each name slot, a mean embedding and an orthonormal
//! set of principal directions. A new identity is a pair of coefficient
//! vectors; its slot embeddings are `mean_k + directions_k^T a_k`.

mod io;
mod pca;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{EmbeddingPair, EmbeddingSet};
use crate::error::{Error, Result};
use crate::hash::fnv1a64;

pub use io::{basis_file_len, load_basis, save_basis, BASIS_HEADER_LEN, BASIS_MAGIC, BASIS_VERSION};
pub use pca::{compute_mean, compute_pca};

/// Mean and principal directions of one embedding set. Values are held at
/// `f32` precision.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisComponent {
    pub mean: DVector<f64>,
    /// `p x d`, one unit direction per row.
    pub directions: DMatrix<f64>,
    pub explained_variance: DVector<f64>,
}

impl BasisComponent {
    pub fn new(
        mean: DVector<f64>,
        directions: DMatrix<f64>,
        explained_variance: DVector<f64>,
    ) -> Result<Self> {
        let (p, d) = directions.shape();
        if mean.len() != d {
            return Err(Error::DimensionMismatch {
                what: "component mean",
                expected: d,
                actual: mean.len(),
            });
        }
        if explained_variance.len() != p {
            return Err(Error::DimensionMismatch {
                what: "explained variance",
                expected: p,
                actual: explained_variance.len(),
            });
        }
        let all = mean
            .iter()
            .chain(directions.iter())
            .chain(explained_variance.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("basis component".into()));
        }
        Ok(BasisComponent {
            mean,
            directions,
            explained_variance,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn p(&self) -> usize {
        self.directions.nrows()
    }

    /// Max-abs deviation of `B B^T` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = &self.directions * self.directions.transpose();
        let p = self.p();
        (gram - DMatrix::<f64>::identity(p, p)).amax()
    }

    fn synthesize(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.mean + self.directions.tr_mul(coeffs)
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.directions * (v - &self.mean)
    }
}

/// The two coefficient groups that fully describe a personalized identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCoefficients {
    pub a1: DVector<f64>,
    pub a2: DVector<f64>,
}

impl IdentityCoefficients {
    pub fn new(a1: DVector<f64>, a2: DVector<f64>) -> Result<Self> {
        if a1.len() != a2.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient groups",
                expected: a1.len(),
                actual: a2.len(),
            });
        }
        if a1.iter().chain(a2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("identity coefficients".into()));
        }
        Ok(IdentityCoefficients { a1, a2 })
    }

    pub fn zeros(p: usize) -> Self {
        IdentityCoefficients {
            a1: DVector::zeros(p),
            a2: DVector::zeros(p),
        }
    }

    pub fn p(&self) -> usize {
        self.a1.len()
    }

    /// Largest deviation of either group norm from 1.
    pub fn unit_norm_error(&self) -> f64 {
        (self.a1.norm() - 1.0).abs().max((self.a2.norm() - 1.0).abs())
    }

    /// Both groups concatenated, `a1` first.
    pub fn to_vec(&self) -> Vec<f64> {
        self.a1.iter().chain(self.a2.iter()).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub first_rows: u32,
    pub second_rows: u32,
    /// Seed of the encoder the source embeddings came from.
    pub build_seed: u64,
}

/// Immutable paired basis. A flattened basis stores the same component in
/// both slots.
#[derive(Debug, Clone, PartialEq)]
pub struct CelebBasis {
    first: BasisComponent,
    second: BasisComponent,
    provenance: Provenance,
}

impl CelebBasis {
    pub fn build(
        first: &EmbeddingSet,
        second: &EmbeddingSet,
        p: usize,
        build_seed: u64,
    ) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                what: "embedding set width",
                expected: first.dim(),
                actual: second.dim(),
            });
        }
        let provenance = Provenance {
            first_rows: first.len() as u32,
            second_rows: second.len() as u32,
            build_seed,
        };
        Self::from_components(compute_pca(first, p)?, compute_pca(second, p)?, provenance)
    }

    /// One component over the pooled rows of both slots, shared by both slots.
    pub fn build_flattened(pooled: &EmbeddingSet, p: usize, build_seed: u64) -> Result<Self> {
        let component = compute_pca(pooled, p)?;
        let provenance = Provenance {
            first_rows: pooled.len() as u32,
            second_rows: pooled.len() as u32,
            build_seed,
        };
        Self::from_components(component.clone(), component, provenance)
    }

    pub fn from_components(
        first: BasisComponent,
        second: BasisComponent,
        provenance: Provenance,
    ) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                what: "component dimension",
                expected: first.dim(),
                actual: second.dim(),
            });
        }
        if first.p() != second.p() {
            return Err(Error::DimensionMismatch {
                what: "component rank",
                expected: first.p(),
                actual: second.p(),
            });
        }
        Ok(CelebBasis {
            first,
            second,
            provenance,
        })
    }

    pub fn first(&self) -> &BasisComponent {
        &self.first
    }

    pub fn second(&self) -> &BasisComponent {
        &self.second
    }

    pub fn components(&self) -> [&BasisComponent; 2] {
        [&self.first, &self.second]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.first.dim()
    }

    pub fn p(&self) -> usize {
        self.first.p()
    }

    pub fn is_flattened(&self) -> bool {
        self.first == self.second
    }

    fn check_p(&self, coeffs: &IdentityCoefficients) -> Result<()> {
        if coeffs.a1.len() != self.p() || coeffs.a2.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficients",
                expected: self.p(),
                actual: coeffs.a1.len().max(coeffs.a2.len()),
            });
        }
        Ok(())
    }

    fn check_d(&self, pair: &EmbeddingPair) -> Result<()> {
        if pair.first.len() != self.dim() || pair.second.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "embedding pair",
                expected: self.dim(),
                actual: pair.first.len().max(pair.second.len()),
            });
        }
        Ok(())
    }

    /// `v_k = mean_k + sum_x a_k[x] * direction_k[x]` for both slots.
    pub fn synthesize(&self, coeffs: &IdentityCoefficients) -> Result<EmbeddingPair> {
        self.check_p(coeffs)?;
        Ok(EmbeddingPair {
            first: self.first.synthesize(&coeffs.a1),
            second: self.second.synthesize(&coeffs.a2),
        })
    }

    /// Coordinates of `pair` in the basis. Not renormalized.
    pub fn project(&self, pair: &EmbeddingPair) -> Result<IdentityCoefficients> {
        self.check_d(pair)?;
        Ok(IdentityCoefficients {
            a1: self.first.project(&pair.first),
            a2: self.second.project(&pair.second),
        })
    }

    /// Pull a gradient on the synthesized pair back to the coefficients.
    pub fn coefficient_gradient(&self, grad: &EmbeddingPair) -> Result<IdentityCoefficients> {
        self.check_d(grad)?;
        Ok(IdentityCoefficients {
            a1: &self.first.directions * &grad.first,
            a2: &self.second.directions * &grad.second,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        io::decode(bytes)
    }

    /// FNV-1a of the serialized basis; checkpoints record it.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(&self.to_bytes())
    }
}

/// `lambda * v1 + (1 - lambda) * v2`.
pub fn interpolate(v1: &DVector<f64>, v2: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch {
            what: "interpolation endpoints",
            expected: v1.len(),
            actual: v2.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "interpolation weight {lambda} outside [0, 1]"
        )));
    }
    Ok(v1 * lambda + v2 * (1.0 - lambda))
}

pub fn interpolate_pair(a: &EmbeddingPair, b: &EmbeddingPair, lambda: f64) -> Result<EmbeddingPair> {
    EmbeddingPair::new(
        interpolate(&a.first, &b.first, lambda)?,
        interpolate(&a.second, &b.second, lambda)?,
    )
}
