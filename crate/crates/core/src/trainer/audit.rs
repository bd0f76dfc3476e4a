use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{Backends, ParamDigest};
use crate::basis::CelebBasis;

/// Digest of every frozen tensor, keyed by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSnapshot(pub BTreeMap<String, ParamDigest>);

pub fn snapshot(backends: &Backends, basis: &CelebBasis) -> ParameterSnapshot {
    let mut map = BTreeMap::new();
    let mut add = |list: Vec<(String, ParamDigest)>| map.extend(list);
    add(backends.text.parameter_digests());
    add(backends.denoiser.parameter_digests());
    add(backends.codec.parameter_digests());
    add(backends.face.parameter_digests());
    add(backends.detector.parameter_digests());
    add(backends.scorer.parameter_digests());
    add(backends.sampler.parameter_digests());
    map.insert("basis".into(), Sha256::digest(basis.to_bytes()).into());
    ParameterSnapshot(map)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Names whose digest changed, appeared or disappeared.
    pub changed: Vec<String>,
    pub checked: usize,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.changed.is_empty()
    }
}

pub fn frozen_audit(before: &ParameterSnapshot, after: &ParameterSnapshot) -> AuditReport {
    let mut changed: Vec<String> = before
        .0
        .iter()
        .filter(|(k, v)| after.0.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    changed.extend(
        after
            .0
            .keys()
            .filter(|k| !before.0.contains_key(*k))
            .cloned(),
    );
    changed.sort();
    AuditReport {
        changed,
        checked: before.0.len(),
    }
}
