//! Name lists and their token embeddings: each name is embedded through the
//! text encoder, reduced to its first two distinct token embeddings, and the
//! pairs are stacked into a first-slot and a second-slot embedding set.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backends::{TextEncoder, TokenId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameList {
    names: Vec<String>,
    source_path: String,
}

impl NameList {
    /// Normalize (trim, collapse whitespace) and deduplicate, keeping the first
    /// occurrence. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, source_path: impl Into<String>) -> Result<Self> {
        let source_path = source_path.into();
        let mut seen = HashSet::new();
        let mut names = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let normalized = line.split_whitespace().collect::<Vec<_>>().join(" ");
            if seen.insert(normalized.clone()) {
                names.push(normalized);
            }
        }
        if names.is_empty() {
            return Err(Error::EmptyNameList(source_path));
        }
        Ok(NameList { names, source_path })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn load_names(path: impl AsRef<Path>) -> Result<NameList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    NameList::parse(&text, path.display().to_string())
}

/// Token embeddings of one name, in tokenizer order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGroup {
    pub name: String,
    pub token_ids: Vec<TokenId>,
    pub embeddings: Vec<DVector<f64>>,
}

impl EmbeddingGroup {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

pub fn embed_name(name: &str, encoder: &dyn TextEncoder) -> Result<EmbeddingGroup> {
    if name.trim().is_empty() {
        return Err(Error::InvalidName("name is empty".into()));
    }
    let token_ids = encoder.tokenize(name)?;
    if token_ids.is_empty() {
        return Err(Error::InvalidName(format!("'{name}' tokenizes to zero tokens")));
    }
    let rows = encoder.dictionary_embed(&token_ids)?;
    let embeddings = rows.row_iter().map(|r| r.transpose()).collect();
    Ok(EmbeddingGroup {
        name: name.to_string(),
        token_ids,
        embeddings,
    })
}

/// Two-slot embedding of an identity (first-name and last-name roles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub first: DVector<f64>,
    pub second: DVector<f64>,
}

impl EmbeddingPair {
    pub fn new(first: DVector<f64>, second: DVector<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::DimensionMismatch {
                what: "pair slots",
                expected: first.len(),
                actual: second.len(),
            });
        }
        if first.iter().chain(second.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding pair".into()));
        }
        Ok(EmbeddingPair { first, second })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }
}

/// An [`EmbeddingPair`] together with the token ids it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedName {
    pub name: String,
    pub token_ids: [TokenId; 2],
    pub pair: EmbeddingPair,
}

/// Keep the first two embeddings with distinct token ids; the rest of a long
/// name is discarded.
pub fn compose_to_pair(group: &EmbeddingGroup) -> Result<ComposedName> {
    let mut picked: Vec<usize> = Vec::with_capacity(2);
    for (i, id) in group.token_ids.iter().enumerate() {
        if picked.iter().all(|&j| group.token_ids[j] != *id) {
            picked.push(i);
            if picked.len() == 2 {
                break;
            }
        }
    }
    if picked.len() < 2 {
        return Err(Error::Composition {
            name: group.name.clone(),
            reason: format!(
                "{} distinct token(s), need at least 2",
                picked.len()
            ),
        });
    }
    let (a, b) = (picked[0], picked[1]);
    Ok(ComposedName {
        name: group.name.clone(),
        token_ids: [group.token_ids[a], group.token_ids[b]],
        pair: EmbeddingPair::new(group.embeddings[a].clone(), group.embeddings[b].clone())?,
    })
}

/// Embed and compose every name, dropping (with a warning) names that do not
/// yield two distinct tokens.
pub fn compose_names(names: &NameList, encoder: &dyn TextEncoder) -> Result<Vec<ComposedName>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names.names() {
        let group = embed_name(name, encoder)?;
        match compose_to_pair(&group) {
            Ok(c) => out.push(c),
            Err(e @ Error::Composition { .. }) => log::warn!("dropping name: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetRole {
    First,
    Second,
    /// Both slots pooled together (the flattened-basis variant).
    Pooled,
}

impl fmt::Display for SetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SetRole::First => "first",
            SetRole::Second => "second",
            SetRole::Pooled => "pooled",
        };
        f.write_str(s)
    }
}

/// Stacked embeddings, one row per distinct source token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub role: SetRole,
    pub rows: DMatrix<f64>,
    pub source_token_ids: Vec<TokenId>,
}

impl EmbeddingSet {
    pub fn from_rows(
        role: SetRole,
        rows: Vec<(TokenId, &DVector<f64>)>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let kept: Vec<_> = rows.into_iter().filter(|(id, _)| seen.insert(*id)).collect();
        if kept.len() < 2 {
            return Err(Error::TooFewRows {
                role: role.to_string(),
                rows: kept.len(),
            });
        }
        let d = kept[0].1.len();
        if let Some((_, v)) = kept.iter().find(|(_, v)| v.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "set row",
                expected: d,
                actual: v.len(),
            });
        }
        if kept.iter().any(|(_, v)| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite(format!("{role} embedding set")));
        }
        let matrix = DMatrix::from_fn(kept.len(), d, |r, c| kept[r].1[c]);
        Ok(EmbeddingSet {
            role,
            rows: matrix,
            source_token_ids: kept.into_iter().map(|(id, _)| id).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }
}

/// Stack first and second slots, dropping rows whose token id was already seen.
pub fn build_sets(pairs: &[ComposedName]) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if pairs.len() < 2 {
        return Err(Error::TooFewRows {
            role: "input".into(),
            rows: pairs.len(),
        });
    }
    let first = EmbeddingSet::from_rows(
        SetRole::First,
        pairs.iter().map(|p| (p.token_ids[0], &p.pair.first)).collect(),
    )?;
    let second = EmbeddingSet::from_rows(
        SetRole::Second,
        pairs.iter().map(|p| (p.token_ids[1], &p.pair.second)).collect(),
    )?;
    Ok((first, second))
}

/// Both slots of every pair in one set, deduplicated across slots.
pub fn build_pooled_set(pairs: &[ComposedName]) -> Result<EmbeddingSet> {
    let rows = pairs
        .iter()
        .flat_map(|p| {
            [
                (p.token_ids[0], &p.pair.first),
                (p.token_ids[1], &p.pair.second),
            ]
        })
        .collect();
    EmbeddingSet::from_rows(SetRole::Pooled, rows)
}

/// Prompts used to screen whether a name is rendered faithfully.
pub fn filter_prompts(name: &str) -> Result<[String; 3]> {
    if name.trim().is_empty() {
        return Err(Error::InvalidName("name is empty".into()));
    }
    Ok([
        format!("A photo of {name}"),
        format!("{name} is playing the guitar"),
        format!("{name} talks with Barack Obama"),
    ])
}
