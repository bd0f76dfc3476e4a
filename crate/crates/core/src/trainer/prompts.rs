//! Prompt templates with identity markers (`{ID}`, `{ID1}`, `{ID_b}`, ...).
//! Each marker expands to two consecutive embedding slots holding an
//! identity's [`EmbeddingPair`].

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::backends::{TextEncoder, TokenId};
use crate::dictionary::EmbeddingPair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    Marker(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptTemplate(String);

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        PromptTemplate(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    /// Split into literal text and markers. Braces that do not form a marker
    /// stay literal.
    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut text = String::new();
        let mut rest = self.0.as_str();
        while let Some(open) = rest.find("{ID") {
            let after = &rest[open + 1..];
            let close = after.find('}');
            let name = close.map(|c| &after[..c]);
            match name {
                Some(name) if is_marker_name(name) => {
                    text.push_str(&rest[..open]);
                    if !text.is_empty() {
                        out.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    out.push(Segment::Marker(name.to_string()));
                    rest = &after[name.len() + 1..];
                }
                _ => {
                    text.push_str(&rest[..open + 1]);
                    rest = &rest[open + 1..];
                }
            }
        }
        text.push_str(rest);
        if !text.is_empty() {
            out.push(Segment::Text(text));
        }
        out
    }

    pub fn markers(&self) -> Vec<String> {
        self.segments()
            .into_iter()
            .filter_map(|s| match s {
                Segment::Marker(m) => Some(m),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Replace each marker with `f(marker)`.
    pub fn render(&self, f: impl Fn(&str) -> String) -> String {
        self.segments()
            .into_iter()
            .map(|s| match s {
                Segment::Text(t) => t,
                Segment::Marker(m) => f(&m),
            })
            .collect()
    }
}

fn is_marker_name(name: &str) -> bool {
    name.starts_with("ID")
        && name[2..]
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// The six training prompts; `{ID}` marks the identity.
pub fn training_prompts() -> Vec<PromptTemplate> {
    [
        "A photo of a face of {ID} person",
        "A rendering of a face of {ID} person",
        "The photo of a face of {ID} person",
        "A rendition of a face of {ID} person",
        "A illustration of a face of {ID} person",
        "A depiction of a face of {ID} person",
    ]
    .into_iter()
    .map(PromptTemplate::new)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderSpan {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

/// Prompt embeddings ready for the text transformer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSequence {
    /// `l x d`, one row per position (sentinels included).
    pub embeddings: DMatrix<f64>,
    /// Dictionary token per position; `None` on identity slots.
    pub token_ids: Vec<Option<TokenId>>,
    pub placeholder_spans: Vec<PlaceholderSpan>,
}

impl ConditionedSequence {
    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.nrows() == 0
    }
}

pub fn substitute_identity(
    template: &PromptTemplate,
    identities: &BTreeMap<String, EmbeddingPair>,
    encoder: &dyn TextEncoder,
) -> Result<ConditionedSequence> {
    let segments = template.segments();
    if !segments.iter().any(|s| matches!(s, Segment::Marker(_))) {
        return Err(Error::MissingMarker);
    }
    let d = encoder.dim();
    let mut slots: Vec<Option<TokenId>> = Vec::new();
    let mut spans = Vec::new();
    slots.extend(encoder.begin_token().map(Some));
    for seg in &segments {
        match seg {
            Segment::Text(t) => slots.extend(encoder.tokenize(t)?.into_iter().map(Some)),
            Segment::Marker(m) => {
                let pair = identities
                    .get(m)
                    .ok_or_else(|| Error::UnboundMarker(m.clone()))?;
                if pair.dim() != d {
                    return Err(Error::DimensionMismatch {
                        what: "identity embedding",
                        expected: d,
                        actual: pair.dim(),
                    });
                }
                spans.push(PlaceholderSpan {
                    label: m.clone(),
                    start: slots.len(),
                    len: 2,
                });
                slots.extend([None, None]);
            }
        }
    }
    slots.extend(encoder.end_token().map(Some));
    if slots.len() > encoder.max_len() {
        return Err(Error::SequenceTooLong {
            len: slots.len(),
            max: encoder.max_len(),
        });
    }

    let ids: Vec<TokenId> = slots.iter().flatten().copied().collect();
    let dictionary = encoder.dictionary_embed(&ids)?;
    let mut embeddings = DMatrix::zeros(slots.len(), d);
    let mut next = 0;
    for (pos, slot) in slots.iter().enumerate() {
        if slot.is_some() {
            embeddings.row_mut(pos).copy_from(&dictionary.row(next));
            next += 1;
        }
    }
    for span in &spans {
        let pair = &identities[&span.label];
        embeddings
            .row_mut(span.start)
            .copy_from(&pair.first.transpose());
        embeddings
            .row_mut(span.start + 1)
            .copy_from(&pair.second.transpose());
    }
    Ok(ConditionedSequence {
        embeddings,
        token_ids: slots,
        placeholder_spans: spans,
    })
}
