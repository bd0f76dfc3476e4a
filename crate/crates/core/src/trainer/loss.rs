use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::backends::Backends;
use crate::basis::{CelebBasis, IdentityCoefficients};
use crate::dictionary::EmbeddingPair;
use crate::error::{Error, Result};

use super::prompts::{substitute_identity, ConditionedSequence, PromptTemplate};
use super::schedule::noise_image;

/// One fixed draw of the denoising objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub template: PromptTemplate,
    pub z0: DVector<f64>,
    pub t: usize,
    pub eps: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    /// Gradient with respect to the normalized coefficients.
    pub coefficient_grad: IdentityCoefficients,
    pub z_t: DVector<f64>,
    pub cond: DMatrix<f64>,
    /// Gradient of the loss with respect to the predicted noise.
    pub grad_pred: DVector<f64>,
}

/// Mean squared error.
pub fn denoising_loss(pred: &DVector<f64>, eps: &DVector<f64>) -> Result<f64> {
    if pred.len() != eps.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "predicted noise",
            expected: eps.len(),
            actual: pred.len(),
        });
    }
    Ok((eps - pred).norm_squared() / pred.len() as f64)
}

/// Bind every marker in `template` to the identity synthesized from `coeffs`.
pub fn condition_for(
    template: &PromptTemplate,
    coeffs: &IdentityCoefficients,
    basis: &CelebBasis,
    backends: &Backends,
) -> Result<ConditionedSequence> {
    let pair = basis.synthesize(coeffs)?;
    let identities: BTreeMap<String, EmbeddingPair> = template
        .markers()
        .into_iter()
        .map(|m| (m, pair.clone()))
        .collect();
    substitute_identity(template, &identities, backends.text.as_ref())
}

pub fn sample_loss(
    coeffs: &IdentityCoefficients,
    sample: &TrainingSample,
    basis: &CelebBasis,
    backends: &Backends,
) -> Result<f64> {
    let seq = condition_for(&sample.template, coeffs, basis, backends)?;
    let cond = backends.text.transform(&seq.embeddings)?;
    let z_t = noise_image(&sample.z0, sample.t, &sample.eps, backends.denoiser.schedule())?;
    let pred = backends.denoiser.predict_noise(&z_t, sample.t, &cond)?;
    denoising_loss(&pred, &sample.eps)
}

/// Loss and its gradient with respect to `coeffs`, backpropagated through the
/// frozen denoiser, text transformer and basis.
pub fn evaluate_sample(
    coeffs: &IdentityCoefficients,
    sample: &TrainingSample,
    basis: &CelebBasis,
    backends: &Backends,
) -> Result<Evaluation> {
    let seq = condition_for(&sample.template, coeffs, basis, backends)?;
    let cond = backends.text.transform(&seq.embeddings)?;
    let z_t = noise_image(&sample.z0, sample.t, &sample.eps, backends.denoiser.schedule())?;
    let pred = backends.denoiser.predict_noise(&z_t, sample.t, &cond)?;
    let loss = denoising_loss(&pred, &sample.eps)?;

    let n = pred.len() as f64;
    let grad_pred = (&pred - &sample.eps) * (2.0 / n);
    let grad_cond = backends
        .denoiser
        .condition_vjp(&z_t, sample.t, &cond, &grad_pred)?;
    let grad_seq = backends.text.transform_vjp(&seq.embeddings, &grad_cond)?;

    let d = basis.dim();
    let mut grad_pair = EmbeddingPair {
        first: DVector::zeros(d),
        second: DVector::zeros(d),
    };
    for span in &seq.placeholder_spans {
        grad_pair.first += grad_seq.row(span.start).transpose();
        grad_pair.second += grad_seq.row(span.start + 1).transpose();
    }
    let coefficient_grad = basis.coefficient_gradient(&grad_pair)?;
    Ok(Evaluation {
        loss,
        coefficient_grad,
        z_t,
        cond,
        grad_pred,
    })
}
