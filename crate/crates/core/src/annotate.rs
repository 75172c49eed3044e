//! Compiles captions into ground-truth answer keys using the schema's ordered
//! mapping rules. Categories no rule matches fall back to the category default
//! and mark the scenario for human curation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AnnotationSchema, AnswerKey, Manifest, ManifestError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotateError {
    #[error("caption is empty")]
    EmptyCaption,
}

/// How a single category's letter was decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CategoryMatch {
    Matched { pattern: String, span: String },
    Defaulted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub key: AnswerKey,
    pub matched_spans: Vec<CategoryMatch>,
    pub needs_curation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario_id: String,
    pub key: AnswerKey,
    pub matched_spans: Vec<CategoryMatch>,
    pub needs_curation: bool,
}

/// The caption up to (and excluding) its first sentence terminator.
pub fn first_sentence(caption: &str) -> &str {
    let bytes = caption.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') {
            let next = bytes.get(i + 1);
            if next.is_none_or(|n| n.is_ascii_whitespace()) {
                return caption[..i].trim();
            }
        }
    }
    caption.trim()
}

pub fn extract(caption: &str, schema: &AnnotationSchema) -> Result<Extraction, AnnotateError> {
    if caption.trim().is_empty() {
        return Err(AnnotateError::EmptyCaption);
    }
    let sentence = first_sentence(caption);
    let mut letters = Vec::with_capacity(schema.len());
    let mut spans = Vec::with_capacity(schema.len());
    for category in schema.categories() {
        let hit = category
            .rules()
            .iter()
            .find_map(|rule| rule.find(sentence).map(|range| (rule, range)));
        match hit {
            Some((rule, range)) => {
                letters.push(rule.letter());
                spans.push(CategoryMatch::Matched {
                    pattern: rule.pattern().to_string(),
                    span: sentence[range].to_string(),
                });
            }
            None => {
                letters.push(category.default_letter());
                spans.push(CategoryMatch::Defaulted);
            }
        }
    }
    let needs_curation = spans.iter().any(|s| *s == CategoryMatch::Defaulted);
    Ok(Extraction {
        key: AnswerKey::new(letters),
        matched_spans: spans,
        needs_curation,
    })
}

impl GroundTruth {
    pub fn from_extraction(scenario_id: impl Into<String>, e: Extraction) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            key: e.key,
            matched_spans: e.matched_spans,
            needs_curation: e.needs_curation,
        }
    }
}

/// Per-category letter frequencies over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrequency {
    pub name: String,
    pub counts: BTreeMap<char, usize>,
    pub defaulted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub schema_id: String,
    pub total: usize,
    pub fully_matched: usize,
    pub needs_curation: usize,
    pub distinct_keys: usize,
    pub key_counts: BTreeMap<String, usize>,
    pub categories: Vec<CategoryFrequency>,
    pub line_errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ManifestExtraction {
    pub truths: Vec<GroundTruth>,
    pub summary: ExtractionSummary,
}

pub fn extract_manifest(manifest: &Manifest, schema: &AnnotationSchema) -> ManifestExtraction {
    let mut truths = Vec::with_capacity(manifest.len());
    let mut line_errors: Vec<String> = manifest.errors.iter().map(ToString::to_string).collect();
    for s in &manifest.scenarios {
        match extract(&s.caption, schema) {
            Ok(e) => truths.push(GroundTruth::from_extraction(&s.scenario_id, e)),
            Err(e) => line_errors.push(format!("scenario {:?}: {e}", s.scenario_id)),
        }
    }
    let summary = summarize(&truths, schema, line_errors);
    ManifestExtraction { truths, summary }
}

pub fn summarize(
    truths: &[GroundTruth],
    schema: &AnnotationSchema,
    line_errors: Vec<String>,
) -> ExtractionSummary {
    let mut key_counts = BTreeMap::new();
    let mut categories: Vec<CategoryFrequency> = schema
        .categories()
        .iter()
        .map(|c| CategoryFrequency {
            name: c.name.clone(),
            counts: c.letters().map(|l| (l, 0)).collect(),
            defaulted: 0,
        })
        .collect();
    for t in truths {
        *key_counts.entry(t.key.to_string()).or_insert(0) += 1;
        for (i, freq) in categories.iter_mut().enumerate() {
            if let Some(letter) = t.key.get(i) {
                *freq.counts.entry(letter).or_insert(0) += 1;
            }
            if t.matched_spans.get(i) == Some(&CategoryMatch::Defaulted) {
                freq.defaulted += 1;
            }
        }
    }
    let needs_curation = truths.iter().filter(|t| t.needs_curation).count();
    ExtractionSummary {
        schema_id: schema.schema_id.clone(),
        total: truths.len(),
        fully_matched: truths.len() - needs_curation,
        needs_curation,
        distinct_keys: key_counts.len(),
        key_counts,
        categories,
        line_errors,
    }
}

/// A human verdict on a scenario's ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationFlag {
    pub scenario_id: String,
    #[serde(default)]
    pub evaluator_id: Option<String>,
    pub verdict: String,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub created_at: Option<String>,
}

/// A ground truth joined with the flags raised against it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisputedTruth {
    pub scenario_id: String,
    pub key: AnswerKey,
    pub needs_curation: bool,
    pub flags: Vec<CurationFlag>,
}

/// Ground truths that carry at least one curation flag, in input order.
pub fn disputed(truths: &[GroundTruth], flags: &[CurationFlag]) -> Vec<DisputedTruth> {
    let mut by_scenario: HashMap<&str, Vec<CurationFlag>> = HashMap::new();
    for f in flags {
        by_scenario
            .entry(f.scenario_id.as_str())
            .or_default()
            .push(f.clone());
    }
    truths
        .iter()
        .filter_map(|t| {
            by_scenario
                .remove(t.scenario_id.as_str())
                .map(|flags| DisputedTruth {
                    scenario_id: t.scenario_id.clone(),
                    key: t.key.clone(),
                    needs_curation: t.needs_curation,
                    flags,
                })
        })
        .collect()
}

pub fn write_truths(path: impl AsRef<Path>, truths: &[GroundTruth]) -> std::io::Result<()> {
    let mut out = String::new();
    for t in truths {
        out.push_str(&serde_json::to_string(t).expect("ground truth serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn load_truths(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ManifestError::Line {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
