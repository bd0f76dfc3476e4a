//! Generation with learned identities and the Prompt / Identity / Detect
//! metrics.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::backends::{Backends, FaceDetector, FaceEncoder, ImageScorer, SamplerParams};
use crate::basis::CelebBasis;
use crate::dictionary::EmbeddingPair;
use crate::error::{Error, Result};
use crate::image::{encode_png, Image};
use crate::io::{read_file, sha256_hex, write_atomic};
use crate::mapper::{FaceFeature, FingerprintPolicy, IdentityCheckpoint};
use crate::trainer::{substitute_identity, PromptTemplate};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 || a.len() != b.len() {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub template: PromptTemplate,
    /// Marker name (`ID`, `ID1`, ...) to checkpoint.
    pub identities: BTreeMap<String, IdentityCheckpoint>,
    pub seed: u64,
    pub count: usize,
    pub params: SamplerParams,
}

#[derive(Debug, Clone)]
pub struct GeneratedImage {
    pub seed: u64,
    pub image: Image,
}

/// Prompt text with each marker replaced by its checkpoint label.
pub fn display_prompt(req: &GenerationRequest) -> String {
    req.template.render(|m| {
        req.identities
            .get(m)
            .map(|c| if c.label.is_empty() { m.to_string() } else { c.label.clone() })
            .unwrap_or_else(|| format!("{{{m}}}"))
    })
}

/// Image `i` uses seed `req.seed + i`.
pub fn generate(
    req: &GenerationRequest,
    basis: &CelebBasis,
    backends: &Backends,
) -> Result<Vec<GeneratedImage>> {
    let fingerprint = basis.fingerprint();
    let mut pairs: BTreeMap<String, EmbeddingPair> = BTreeMap::new();
    for (marker, ckpt) in &req.identities {
        ckpt.verify_basis(fingerprint, FingerprintPolicy::Error)?;
        pairs.insert(marker.clone(), basis.synthesize(&ckpt.coefficients)?);
    }
    generate_from_pairs(&req.template, &pairs, req.seed, req.count, &req.params, backends)
}

/// Sample with explicit embedding pairs bound to the markers.
pub fn generate_from_pairs(
    template: &PromptTemplate,
    pairs: &BTreeMap<String, EmbeddingPair>,
    seed: u64,
    count: usize,
    params: &SamplerParams,
    backends: &Backends,
) -> Result<Vec<GeneratedImage>> {
    let seq = substitute_identity(template, pairs, backends.text.as_ref())?;
    let cond = backends.text.transform(&seq.embeddings)?;
    (0..count as u64)
        .map(|i| {
            let seed = seed.wrapping_add(i);
            let image = backends.sampler.sample(&cond, seed, params)?;
            Ok(GeneratedImage { seed, image })
        })
        .collect()
}

pub fn prompt_score(image: &Image, prompt: &str, scorer: &dyn ImageScorer) -> Result<f64> {
    scorer.score(image, prompt)
}

/// `None` when the detector finds no face.
pub fn identity_score(
    image: &Image,
    reference: &FaceFeature,
    face: &dyn FaceEncoder,
    detector: &dyn FaceDetector,
) -> Result<Option<f64>> {
    if !detector.detect(image)? {
        return Ok(None);
    }
    let feature = face.extract(image)?;
    Ok(Some(cosine(feature.values(), reference.values())))
}

pub fn detection_rate(images: &[Image], detector: &dyn FaceDetector) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("detection rate of zero images".into()));
    }
    let mut detected = 0usize;
    for img in images {
        if detector.detect(img)? {
            detected += 1;
        }
    }
    Ok(detected as f64 / images.len() as f64)
}

#[derive(Debug, Clone)]
pub struct EvalItem {
    /// Path as written to the report.
    pub path: String,
    pub image: Image,
    pub prompt: String,
    /// Key into the reference features.
    pub identity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image: String,
    pub sha256: String,
    pub prompt: String,
    pub identity: Option<String>,
    pub prompt_score: f64,
    pub detected: bool,
    pub identity_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub adapters: BTreeMap<String, String>,
    pub total: usize,
    pub detected: usize,
    pub prompt_score: f64,
    /// Mean over rows with a defined score; `null` when there are none.
    pub identity_score: Option<f64>,
    /// Rows without a defined identity score.
    pub identity_excluded: usize,
    pub detect_rate: f64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Aggregate in row order.
    pub fn from_rows(rows: Vec<EvalRow>, adapters: BTreeMap<String, String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("evaluation needs at least one image".into()));
        }
        let total = rows.len();
        let detected = rows.iter().filter(|r| r.detected).count();
        let prompt_score = rows.iter().map(|r| r.prompt_score).sum::<f64>() / total as f64;
        let defined: Vec<f64> = rows.iter().filter_map(|r| r.identity_score).collect();
        let identity_score = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };
        Ok(EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            adapters,
            total,
            detected,
            prompt_score,
            identity_score,
            identity_excluded: total - defined.len(),
            detect_rate: detected as f64 / total as f64,
            rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported report schema version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = read_file(path.as_ref())?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format("report is not UTF-8".into()))?;
        Self::from_json(&text)
    }
}

pub fn evaluate_run(
    items: &[EvalItem],
    references: &BTreeMap<String, FaceFeature>,
    backends: &Backends,
) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(items.len());
    for item in items {
        let detected = backends.detector.detect(&item.image)?;
        let identity_score = match (&item.identity, detected) {
            (Some(label), true) => {
                let reference = references.get(label).ok_or_else(|| {
                    Error::InvalidArgument(format!("no reference image for identity '{label}'"))
                })?;
                let feature = backends.face.extract(&item.image)?;
                Some(cosine(feature.values(), reference.values()))
            }
            _ => None,
        };
        rows.push(EvalRow {
            image: item.path.clone(),
            sha256: sha256_hex(&encode_png(&item.image)?),
            prompt: item.prompt.clone(),
            identity: item.identity.clone(),
            prompt_score: prompt_score(&item.image, &item.prompt, backends.scorer.as_ref())?,
            detected,
            identity_score,
        });
    }
    EvalReport::from_rows(rows, backends.identifiers())
}

/// Input list for the `eval` command. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalManifest {
    pub entries: Vec<EvalEntry>,
    /// Identity label to reference image path.
    #[serde(default)]
    pub references: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub image: String,
    pub prompt: String,
    #[serde(default)]
    pub identity: Option<String>,
}
